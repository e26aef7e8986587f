use snmarg::inference::validation::{csmc_prior_invariance, geweke_test, GewekeConfig};
use snmarg::inference::{ChainConfig, ChainState, PriorDraw, Priors, RegimeKind, ScalePrior, SmcConfig};
use snmarg::marg::{LatentPath, ScaleRegime};
use snmarg::obs::CovariateDesign;
use snmarg::{Grid, Rect, SeedKey};

fn tiny_priors() -> Priors {
    Priors {
        a_alpha: 4.0,
        b_alpha: 4.0,
        a_beta: 4.0,
        b_beta: 8.0,
        a_gamma: 10.0,
        b_gamma: 10.0,
        a_phi: 10.0,
        b_phi: 20.0,
        scale: ScalePrior::Constant { a_c: 4.0, b_c: 8.0 },
        eta_mean: vec![0.5, 0.0],
        eta_cov: vec![vec![0.25, 0.0], vec![0.0, 0.01]],
    }
}

#[test]
fn geweke_tiny_model() {
    let grid = Grid::uniform(Rect::new(0.0, 2.0, 0.0, 2.0).unwrap(), 2, 2, 1.0).unwrap();
    let mut chain = ChainConfig::new(0, 4);
    chain.smc = SmcConfig::new(8, 4, 8);
    chain.adapt = false;
    let cfg = GewekeConfig {
        grid,
        horizon: 6,
        design: CovariateDesign::Trend,
        regime: RegimeKind::Constant,
        priors: tiny_priors(),
        chain,
        marginal_draws: 10_000,
        successive_iterations: 60_000,
        batches: 50,
    };
    let mut rng = SeedKey::new(2024).rng();
    for r in geweke_test(&cfg, &mut rng).unwrap() {
        assert!(r.z_score().abs() < 4.0, "{r:?}");
    }
}

#[test]
fn data_free_csmc_keeps_prior_law() {
    let params = PriorDraw {
        alpha: vec![0.7, 1.5, 2.0],
        beta: 1.6,
        scales: ScaleRegime::Constant { c: 0.5 },
        gamma: 1.0,
        phi: 0.3,
        r: None,
        eta: vec![0.0],
    };
    let state = ChainState::from_parts(params, LatentPath::zeros(5, 3), vec![Vec::new(); 5]);
    let cfg = SmcConfig { particles: 4, blocks: vec![vec![0, 1], vec![2]] };
    let mut rng = SeedKey::new(77).rng();
    for r in csmc_prior_invariance(&state, &cfg, 4_000, 25, &mut rng).unwrap() {
        assert!(r.z_score().abs() < 4.0, "{r:?}");
    }
}
