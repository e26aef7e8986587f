use proptest::prelude::*;

use snmarg::analytics::pair_correlation;
use snmarg::dists::{gamma_logpdf, ncgamma_logpdf, NcGammaParams};
use snmarg::marg::lag_params;
use snmarg::obs::kernel_mass;
use snmarg::{CovariateModel, Grid, InitialLaw, MargParams, ModelSpec, Rect, ScaleRegime};

fn scales(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..2.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_noncentrality_is_a_gamma(shape in 0.2f64..20.0, scale in 0.05f64..5.0, y in 1e-3f64..30.0) {
        let p = NcGammaParams::new(shape, 0.0, scale).unwrap();
        let a = ncgamma_logpdf(y, &p).unwrap();
        let b = gamma_logpdf(y, shape, 1.0 / scale);
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn kernel_mass_is_additive_over_quadrants(
        x0 in -2.0f64..2.0, y0 in -2.0f64..2.0, w in 0.1f64..3.0, h in 0.1f64..3.0,
        tx in -3.0f64..3.0, ty in -3.0f64..3.0, phi in 0.05f64..2.0,
    ) {
        let r = Rect::new(x0, x0 + w, y0, y0 + h).unwrap();
        let whole = kernel_mass(&r, [tx, ty], phi);
        let parts: f64 = r.quadrants().iter().map(|q| kernel_mass(q, [tx, ty], phi)).sum();
        prop_assert!((whole - parts).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&whole));
    }

    #[test]
    fn every_atom_locates_to_its_cell(nx in 1usize..12, ny in 1usize..12, x0 in -50.0f64..50.0, w in 0.5f64..20.0) {
        let g = Grid::uniform(Rect::new(x0, x0 + w, 0.0, w / 2.0).unwrap(), nx, ny, 1.0).unwrap();
        for (j, a) in g.atoms().iter().enumerate() {
            prop_assert_eq!(g.locate(a[0], a[1]), Some(j));
        }
    }

    #[test]
    fn lag_parameters_compose(beta in 0.1f64..3.0, c in scales(10), t in 1usize..4, h1 in 1usize..4, h2 in 1usize..4) {
        let grid = Grid::uniform(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 1, 1, 1.0).unwrap();
        let p = MargParams::new(grid, beta, ScaleRegime::TimeVarying { c }, 10).unwrap();
        let a = lag_params(t, h1, &p).unwrap();
        let b = lag_params(t + h1, h2, &p).unwrap();
        let ab = lag_params(t, h1 + h2, &p).unwrap();
        prop_assert!((ab.rho - a.rho * b.rho).abs() < 1e-12 * ab.rho);
        prop_assert!((ab.scale - (b.scale + b.rho * a.scale)).abs() < 1e-12 * ab.scale);
    }

    #[test]
    fn stationary_pair_correlation_is_at_least_one(
        masses in prop::collection::vec(0.05f64..3.0, 9),
        beta in 0.1f64..2.0, c in 0.05f64..0.5, phi in 0.1f64..1.5,
        y1 in prop::array::uniform2(0.0f64..3.0), y2 in prop::array::uniform2(0.0f64..3.0), h in 0usize..3,
    ) {
        prop_assume!(beta * c < 0.95);
        let grid = Grid::new(Rect::new(0.0, 3.0, 0.0, 3.0).unwrap(), 3, 3, masses).unwrap();
        let latent = MargParams::new(grid, beta, ScaleRegime::Constant { c }, 4).unwrap();
        let spec = ModelSpec { latent, phi, covariates: CovariateModel::unit(4), init: InitialLaw::Stationary };
        prop_assert!(pair_correlation(y1, y2, 1, h, &spec).unwrap() >= 1.0);
    }

    #[test]
    fn scale_regimes_round_trip_through_json(c in scales(5), xi in prop::array::uniform12(0.05f64..2.0), m in 1u32..13) {
        for r in [ScaleRegime::TimeVarying { c: c.clone() }, ScaleRegime::Monthly { xi, start_month: m }] {
            let s = serde_json::to_string(&r).unwrap();
            prop_assert_eq!(serde_json::from_str::<ScaleRegime<f64>>(&s).unwrap(), r);
        }
    }
}
