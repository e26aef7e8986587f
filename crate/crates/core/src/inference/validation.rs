//! Simulation checks of the sampler: Geweke's joint-distribution test, prior
//! invariance of the data-free conditional SMC kernel and parameter recovery
//! on synthetic data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::inference::csmc::{csmc_sweep, SmcConfig};
use crate::inference::archive::summarize;
use crate::inference::gibbs::{particle_gibbs_step, run_chain, simulate_latent_path, simulate_observations, ChainConfig, DrawParams};
use crate::inference::priors::Priors;
use crate::inference::state::{draw_from_prior, ChainState, InferenceData, RegimeKind};
use crate::marg::{InitialLaw, LatentPath, MargParams, ScaleRegime};
use crate::obs::{simulate_series, CovariateDesign, CovariateModel, ModelSpec, PointSeries};
use crate::rng::SeedKey;
use crate::grid::Rect;
use crate::stats;

/// Comparison of one test function under the two simulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeRow {
    pub name: String,
    pub marginal_mean: f64,
    pub marginal_se: f64,
    pub successive_mean: f64,
    pub successive_se: f64,
}

impl GewekeRow {
    pub fn z_score(&self) -> f64 {
        let se = (self.marginal_se.powi(2) + self.successive_se.powi(2)).sqrt();
        (self.successive_mean - self.marginal_mean) / se
    }
}

/// Tunables of [`geweke_test`].
#[derive(Debug, Clone, PartialEq)]
pub struct GewekeConfig {
    pub grid: Grid<f64>,
    pub horizon: usize,
    pub design: CovariateDesign<f64>,
    pub regime: RegimeKind,
    pub priors: Priors,
    pub chain: ChainConfig,
    /// Independent draws for the marginal-conditional simulator.
    pub marginal_draws: usize,
    /// Iterations of the successive-conditional simulator.
    pub successive_iterations: usize,
    /// Batches used for the successive-conditional standard errors.
    pub batches: usize,
}

fn observe(state: &mut ChainState, data: &InferenceData, rng: &mut (impl Rng + ?Sized)) -> Result<InferenceData> {
    let series = simulate_observations(state, data, rng)?;
    state.alloc = series
        .steps()
        .iter()
        .map(|evs| evs.iter().map(|e| e.z.expect("simulated events carry their cell")).collect())
        .collect();
    data.with_series(series)
}

fn prior_state(cfg: &GewekeConfig, rng: &mut (impl Rng + ?Sized)) -> Result<ChainState> {
    let p = draw_from_prior(&cfg.priors, cfg.grid.len(), cfg.horizon, cfg.regime, rng)?;
    let mut state = ChainState::from_parts(p, LatentPath::zeros(cfg.horizon, cfg.grid.len()), vec![Vec::new(); cfg.horizon]);
    state.path = simulate_latent_path(&state, rng);
    Ok(state)
}

fn test_functions(state: &ChainState) -> Vec<(String, f64)> {
    let params = DrawParams {
        alpha: state.alpha.clone(),
        beta: state.beta,
        scales: state.scales.clone(),
        gamma: state.gamma,
        phi: state.phi,
        r: state.r,
        eta: state.eta.clone(),
    };
    let mut out: Vec<(String, f64)> = params.named_values().into_iter().filter(|(n, _)| n != "rho").collect();
    let first: Vec<(String, f64)> = out.clone();
    for (n, v) in first {
        out.push((format!("{n}^2"), v * v));
    }
    for (label, t) in [("1", 1), ("T", state.horizon())] {
        let total: f64 = state.path.row(t).iter().sum();
        out.push((format!("ln w_total[{label}]"), total.ln()));
    }
    out
}

/// Geweke's test: moments of `(ψ, w)` from independent prior draws against
/// those from alternating data simulation with particle-Gibbs sweeps.
pub fn geweke_test<G: Rng + ?Sized>(cfg: &GewekeConfig, rng: &mut G) -> Result<Vec<GewekeRow>> {
    if cfg.marginal_draws < 2 || cfg.successive_iterations < cfg.batches || cfg.batches < 2 {
        return Err(Error::InvalidArgument("too few Geweke draws".into()));
    }
    let empty = InferenceData::new(cfg.grid.clone(), PointSeries::empty(cfg.horizon), cfg.design.clone())?;

    let mut marginal: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    for _ in 0..cfg.marginal_draws {
        let s = prior_state(cfg, rng)?;
        let f = test_functions(&s);
        if names.is_empty() {
            names = f.iter().map(|(n, _)| n.clone()).collect();
            marginal = vec![Vec::with_capacity(cfg.marginal_draws); names.len()];
        }
        for (col, (_, v)) in marginal.iter_mut().zip(f) {
            col.push(v);
        }
    }

    let mut state = prior_state(cfg, rng)?;
    let mut data = observe(&mut state, &empty, rng)?;
    let mut successive: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.successive_iterations); names.len()];
    for it in 1..=cfg.successive_iterations {
        particle_gibbs_step(&mut state, &data, &cfg.priors, &cfg.chain, it as u64, false, rng)?;
        data = observe(&mut state, &data, rng)?;
        for (col, (_, v)) in successive.iter_mut().zip(test_functions(&state)) {
            col.push(v);
        }
    }

    Ok(names
        .into_iter()
        .zip(marginal.iter().zip(&successive))
        .map(|(name, (m, s))| {
            let (mm, mse) = stats::mean_se(m);
            GewekeRow {
                name,
                marginal_mean: mm,
                marginal_se: mse,
                successive_mean: stats::mean_var(s).0,
                successive_se: stats::batch_means_se(s, cfg.batches),
            }
        })
        .collect())
}

/// Result of one moment comparison in [`csmc_prior_invariance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceRow {
    pub name: String,
    pub expected: f64,
    pub estimate: f64,
    pub se: f64,
}

impl InvarianceRow {
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.expected) / self.se
    }
}

/// Apply the data-free cSMC kernel `iterations` times to every one of
/// `chains` independent prior paths and compare the mean, variance and lag-1
/// autocovariance of cell 0 at each `t` with those of fresh prior paths.
pub fn csmc_prior_invariance<G: Rng + ?Sized>(
    state: &ChainState,
    config: &SmcConfig,
    chains: usize,
    iterations: usize,
    rng: &mut G,
) -> Result<Vec<InvarianceRow>> {
    let t_max = state.horizon();
    let mut evolved: Vec<LatentPath<f64>> = Vec::with_capacity(chains);
    let mut fresh: Vec<LatentPath<f64>> = Vec::with_capacity(chains);
    for _ in 0..chains {
        let mut s = state.clone();
        s.path = simulate_latent_path(state, rng);
        for _ in 0..iterations {
            csmc_sweep(&mut s, None, config, rng)?;
        }
        evolved.push(s.path);
        fresh.push(simulate_latent_path(state, rng));
    }
    let mut rows = Vec::new();
    let col = |paths: &[LatentPath<f64>], t: usize| -> Vec<f64> { paths.iter().map(|p| p.get(t, 0)).collect() };
    for t in 1..=t_max {
        let (a, b) = (col(&evolved, t), col(&fresh, t));
        let (ma, sa) = stats::mean_se(&a);
        let (mb, sb) = stats::mean_se(&b);
        rows.push(InvarianceRow { name: format!("mean w[{t}]"), expected: mb, estimate: ma, se: sa.hypot(sb) });
        let (va, vsa) = stats::variance_se(&a);
        let (vb, vsb) = stats::variance_se(&b);
        rows.push(InvarianceRow { name: format!("var w[{t}]"), expected: vb, estimate: va, se: vsa.hypot(vsb) });
        if t > 1 {
            let lag = |paths: &[LatentPath<f64>]| -> Vec<f64> {
                paths.iter().map(|p| p.get(t, 0) * p.get(t - 1, 0)).collect()
            };
            let (la, lsa) = stats::mean_se(&lag(&evolved));
            let (lb, lsb) = stats::mean_se(&lag(&fresh));
            rows.push(InvarianceRow { name: format!("E w[{t}] w[{}]", t - 1), expected: lb, estimate: la, se: lsa.hypot(lsb) });
        }
    }
    Ok(rows)
}

/// Synthetic-data recovery experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySetup {
    pub spec: ModelSpec<f64>,
    pub priors: Priors,
    pub chain: ChainConfig,
    /// Names of the parameters whose coverage is checked.
    pub checked: Vec<String>,
}

impl RecoverySetup {
    /// 6×6 grid on `[0, 3]²` with unit α, `β = 1.2`, `c = 0.4`, `φ = 0.25`,
    /// a trend design with `η = (1, 0.03)` and `T = 24`. The priors are the
    /// defaults except `α_j | γ ~ Ga(10, 10γ)`: under the shape-2 default some
    /// cells' α collapse towards zero, their events move to neighbours and
    /// the bandwidth posterior sits about 15% above the truth.
    pub fn standard(iterations: usize, burn_in: usize, thin: usize) -> Result<Self> {
        let horizon = 24;
        let grid = Grid::uniform(Rect::new(0.0, 3.0, 0.0, 3.0)?, 6, 6, 1.0)?;
        let latent = MargParams::new(grid, 1.2, ScaleRegime::Constant { c: 0.4 }, horizon)?;
        let covariates = CovariateModel::new(CovariateDesign::Trend, vec![1.0, 0.03], horizon)?;
        let spec = ModelSpec { latent, phi: 0.25, covariates, init: InitialLaw::Stationary };
        let mut chain = ChainConfig::new(iterations, spec.grid().len());
        chain.burn_in = burn_in;
        chain.thin = thin;
        let mut priors = Priors::default_for(2, false);
        priors.a_alpha = 10.0;
        priors.b_alpha = 10.0;
        Ok(RecoverySetup {
            spec,
            priors,
            chain,
            checked: ["beta", "c", "rho", "phi", "eta[0]", "eta[1]"].iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn truth(&self) -> DrawParams {
        DrawParams {
            alpha: self.spec.grid().masses().to_vec(),
            beta: self.spec.latent.beta,
            scales: self.spec.latent.scales.clone(),
            gamma: f64::NAN,
            phi: self.spec.phi,
            r: None,
            eta: self.spec.covariates.eta.clone(),
        }
    }
}

/// Credible interval of one parameter against its true value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

impl Coverage {
    pub fn covered(&self) -> bool {
        self.q025 <= self.truth && self.truth <= self.q975
    }
}

/// Simulate data from `setup.spec` with `key`, fit it and report 95%
/// credible intervals for every parameter with a known true value.
pub fn recovery_replicate(setup: &RecoverySetup, key: SeedKey) -> Result<Vec<Coverage>> {
    let (_, mut series) = simulate_series(&setup.spec, key.child(0))?;
    series.clear_allocations();
    let data = InferenceData::new(setup.spec.grid().clone(), series, setup.spec.covariates.design.clone())?;
    let init = ChainState::initialize(&data, &setup.priors, ScaleRegime::Constant { c: 1.0 })?;
    let mut rng = key.child(1).rng();
    let out = run_chain(&data, &setup.priors, &setup.chain, init, &mut rng, |_| Ok(()))?;
    let summary = summarize(&out.draws, out.acceptance)?;
    let truth = setup.truth().named_values();
    Ok(truth
        .into_iter()
        .filter(|(n, v)| v.is_finite() && n != "gamma")
        .filter_map(|(name, v)| {
            summary.get(&name).map(|p| Coverage { truth: v, mean: p.mean, q025: p.q025, q975: p.q975, name })
        })
        .collect())
}
