//! Shot-noise Cox observation layer: Gaussian kernel, global factor `κ_t`,
//! intensity evaluation and point-pattern simulation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::grid::{Grid, Rect};
use crate::marg::{month_of, simulate_statespace, InitialLaw, LatentPath, MargParams};
use crate::real::{std_normal_cdf, Real};
use crate::rng::SeedKey;

/// Attempts per event before truncated-normal rejection gives up.
pub const MAX_REJECTIONS: usize = 10_000;

/// Frequencies of the four harmonic components used for the fire data.
pub const DEFAULT_FREQUENCIES: [f64; 4] = [0.086, 0.168, 0.254, 0.336];

/// Dry-season months (August to December).
pub const DEFAULT_DRY_MONTHS: [u32; 5] = [8, 9, 10, 11, 12];

/// Isotropic Gaussian kernel `N₂(θ, φ² I)` restricted to a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct KernelSpec<R: Real = f64> {
    pub bandwidth: R,
    pub window: Rect<R>,
}

impl<R: Real> KernelSpec<R> {
    pub fn new(bandwidth: R, window: Rect<R>) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(KernelSpec { bandwidth, window })
    }

    pub fn density(&self, y: [R; 2], theta: [R; 2]) -> R {
        kernel_density(y, theta, self.bandwidth)
    }

    /// Mass the kernel centred at `theta` puts on the window.
    pub fn window_mass(&self, theta: [R; 2]) -> R {
        kernel_mass(&self.window, theta, self.bandwidth)
    }
}

fn check_bandwidth<R: Real>(phi: R) -> Result<()> {
    if phi > R::zero() && phi.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("bandwidth must be > 0, got {phi}")))
    }
}

/// `(2πφ²)⁻¹ exp(-‖y - θ‖² / (2φ²))`.
#[inline]
pub fn kernel_density<R: Real>(y: [R; 2], theta: [R; 2], phi: R) -> R {
    let dx = y[0] - theta[0];
    let dy = y[1] - theta[1];
    let v = phi * phi;
    (-(dx * dx + dy * dy) / (R::lit(2.0) * v)).exp() / (R::lit(2.0) * R::PI() * v)
}

/// `log K_φ(y, θ)`.
#[inline]
pub fn kernel_log_density<R: Real>(y: [R; 2], theta: [R; 2], phi: R) -> R {
    let dx = y[0] - theta[0];
    let dy = y[1] - theta[1];
    let v = phi * phi;
    -(dx * dx + dy * dy) / (R::lit(2.0) * v) - (R::lit(2.0) * R::PI() * v).ln()
}

/// `P(a ≤ Z ≤ b)` for standard normal `Z`, using the tail on the side away
/// from zero to avoid cancellation.
fn normal_interval<R: Real>(a: R, b: R) -> R {
    let half = R::lit(0.5);
    let s = R::SQRT_2();
    if a >= R::zero() {
        half * ((a / s).erfc() - (b / s).erfc())
    } else if b <= R::zero() {
        half * ((-b / s).erfc() - (-a / s).erfc())
    } else {
        R::one() - std_normal_cdf(a) - half * (b / s).erfc()
    }
}

/// `K_φ(A, θ) = ∫_A K_φ(y, θ) dy` for an axis-aligned rectangle (bounds may be infinite).
pub fn kernel_mass<R: Real>(rect: &Rect<R>, theta: [R; 2], phi: R) -> R {
    let px = normal_interval((rect.x0 - theta[0]) / phi, (rect.x1 - theta[0]) / phi);
    let py = normal_interval((rect.y0 - theta[1]) / phi, (rect.y1 - theta[1]) / phi);
    (px * py).max(R::zero())
}

/// `K_φ(𝕐, θ_j)` for every cell of the grid.
pub fn cell_kernel_masses<R: Real>(grid: &Grid<R>, phi: R) -> Vec<R> {
    let window = *grid.window();
    grid.atoms().iter().map(|&a| kernel_mass(&window, a, phi)).collect()
}

/// Design of the covariate vector `x_t`; every design starts with an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateDesign<R: Real = f64> {
    /// `x_t = (1)`.
    Intercept,
    /// `x_t = (1, t)`.
    Trend,
    /// `x_t = (1, t, d_t)` with `d_t = 1` in the listed calendar months.
    Dummy { dry_months: Vec<u32>, start_month: u32 },
    /// `x_t = (1, t, sin 2πω₁t, cos 2πω₁t, …)`.
    Harmonic { frequencies: Vec<R> },
    /// Explicit rows, one per time step.
    Custom { rows: Vec<Vec<R>> },
}

impl<R: Real> CovariateDesign<R> {
    pub fn dummy_default() -> Self {
        CovariateDesign::Dummy {
            dry_months: DEFAULT_DRY_MONTHS.to_vec(),
            start_month: 1,
        }
    }

    pub fn harmonic_default() -> Self {
        CovariateDesign::Harmonic {
            frequencies: DEFAULT_FREQUENCIES.iter().map(|&w| R::lit(w)).collect(),
        }
    }

    /// Number of covariates `m`.
    pub fn dim(&self) -> usize {
        match self {
            CovariateDesign::Intercept => 1,
            CovariateDesign::Trend => 2,
            CovariateDesign::Dummy { .. } => 3,
            CovariateDesign::Harmonic { frequencies } => 2 + 2 * frequencies.len(),
            CovariateDesign::Custom { rows } => rows.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CovariateDesign::Dummy { dry_months, start_month } => {
                if !(1..=12).contains(start_month) || dry_months.iter().any(|m| !(1..=12).contains(m)) {
                    return Err(Error::InvalidParameter("months must lie in 1..=12".into()));
                }
            }
            CovariateDesign::Harmonic { frequencies } => {
                if frequencies.is_empty()
                    || frequencies.iter().any(|w| !(*w > R::zero() && *w < R::lit(0.5)))
                {
                    return Err(Error::InvalidParameter("harmonic frequencies must lie in (0, 0.5)".into()));
                }
            }
            CovariateDesign::Custom { rows } => {
                let m = self.dim();
                if m == 0 || rows.iter().any(|r| r.len() != m || r.iter().any(|v| !v.is_finite())) {
                    return Err(Error::InvalidParameter("custom design rows must be finite and equal-length".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `x_t` for 1-based `t`; analytic designs extrapolate past the horizon.
    pub fn row(&self, t: usize) -> Result<Vec<R>> {
        check_index("t", t, 1, usize::MAX)?;
        let tf = R::from_count(t);
        Ok(match self {
            CovariateDesign::Intercept => vec![R::one()],
            CovariateDesign::Trend => vec![R::one(), tf],
            CovariateDesign::Dummy { dry_months, start_month } => {
                let month = month_of(t, *start_month) as u32;
                let d = if dry_months.contains(&month) { R::one() } else { R::zero() };
                vec![R::one(), tf, d]
            }
            CovariateDesign::Harmonic { frequencies } => {
                let mut row = vec![R::one(), tf];
                for &w in frequencies {
                    let arg = R::lit(2.0) * R::PI() * w * tf;
                    row.push(arg.sin());
                    row.push(arg.cos());
                }
                row
            }
            CovariateDesign::Custom { rows } => {
                check_index("t", t, 1, rows.len())?;
                rows[t - 1].clone()
            }
        })
    }
}

/// `κ_t = exp(η · x_t)` over a horizon `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct CovariateModel<R: Real = f64> {
    pub design: CovariateDesign<R>,
    pub eta: Vec<R>,
    pub horizon: usize,
}

impl<R: Real> CovariateModel<R> {
    pub fn new(design: CovariateDesign<R>, eta: Vec<R>, horizon: usize) -> Result<Self> {
        let m = CovariateModel { design, eta, horizon };
        m.validate()?;
        Ok(m)
    }

    /// `κ_t ≡ 1`.
    pub fn unit(horizon: usize) -> Self {
        CovariateModel {
            design: CovariateDesign::Intercept,
            eta: vec![R::zero()],
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if self.eta.len() != self.design.dim() {
            return Err(Error::InvalidParameter(format!(
                "design has {} covariates but eta has {}",
                self.design.dim(),
                self.eta.len()
            )));
        }
        if self.eta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("eta must be finite".into()));
        }
        if let CovariateDesign::Custom { rows } = &self.design {
            if rows.len() < self.horizon {
                return Err(Error::InvalidParameter("custom design has fewer rows than T".into()));
            }
        }
        Ok(())
    }

    /// The `T × m` design matrix.
    pub fn design_matrix(&self) -> Result<Vec<Vec<R>>> {
        (1..=self.horizon).map(|t| self.design.row(t)).collect()
    }

    /// `κ_t` with no horizon check (forecasting).
    pub fn kappa_at(&self, t: usize) -> Result<R> {
        let x = self.design.row(t)?;
        Ok(x.iter().zip(&self.eta).map(|(&a, &b)| a * b).sum::<R>().exp())
    }

    /// `κ_t` for all `t` in `1..=T`.
    pub fn kappas(&self) -> Result<Vec<R>> {
        (1..=self.horizon).map(|t| self.kappa_at(t)).collect()
    }
}

/// `κ_t` for `t` in `1..=T`.
pub fn kappa_eval<R: Real>(model: &CovariateModel<R>, t: usize) -> Result<R> {
    check_index("t", t, 1, model.horizon)?;
    model.kappa_at(t)
}

/// `Λ_t(dy) / dy = κ_t Σ_j w_{j,t} K_φ(y, θ_j)`.
pub fn intensity_at<R: Real>(y: [R; 2], w_t: &[R], kappa_t: R, grid: &Grid<R>, phi: R) -> R {
    let s: R = grid
        .atoms()
        .iter()
        .zip(w_t)
        .filter(|(_, &w)| w > R::zero())
        .map(|(&a, &w)| w * kernel_density(y, a, phi))
        .sum();
    kappa_t * s
}

/// `Λ_t(𝕐) = κ_t Σ_j w_{j,t} K_φ(𝕐, θ_j)`.
pub fn intensity_total<R: Real>(w_t: &[R], kappa_t: R, grid: &Grid<R>, phi: R) -> R {
    intensity_total_with(w_t, kappa_t, &cell_kernel_masses(grid, phi))
}

/// [`intensity_total`] with precomputed window masses.
#[inline]
pub fn intensity_total_with<R: Real>(w_t: &[R], kappa_t: R, masses: &[R]) -> R {
    kappa_t * w_t.iter().zip(masses).map(|(&w, &m)| w * m).sum::<R>()
}

/// One observed event: planar location and optional cell allocation (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct Event<R: Real = f64> {
    pub x: R,
    pub y: R,
    pub z: Option<usize>,
}

impl<R: Real> Event<R> {
    pub fn location(&self) -> [R; 2] {
        [self.x, self.y]
    }
}

/// Point patterns for `t = 1..=T`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct PointSeries<R: Real = f64> {
    steps: Vec<Vec<Event<R>>>,
}

impl<R: Real> PointSeries<R> {
    pub fn empty(horizon: usize) -> Self {
        PointSeries {
            steps: vec![Vec::new(); horizon],
        }
    }

    pub fn from_steps(steps: Vec<Vec<Event<R>>>) -> Self {
        PointSeries { steps }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Events at 1-based `t`.
    pub fn at(&self, t: usize) -> &[Event<R>] {
        &self.steps[t - 1]
    }

    pub fn at_mut(&mut self, t: usize) -> &mut Vec<Event<R>> {
        &mut self.steps[t - 1]
    }

    pub fn steps(&self) -> &[Vec<Event<R>>] {
        &self.steps
    }

    /// `N_t^y` per step.
    pub fn counts(&self) -> Vec<usize> {
        self.steps.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }

    /// Check locations against the window and allocations against the cell count.
    pub fn validate(&self, window: &Rect<R>, n_cells: usize) -> Result<()> {
        for (t, evs) in self.steps.iter().enumerate() {
            for e in evs {
                if !window.contains(e.x, e.y) {
                    return Err(Error::InvalidArgument(format!(
                        "event ({}, {}) at t = {} lies outside the window",
                        e.x,
                        e.y,
                        t + 1
                    )));
                }
                if let Some(z) = e.z {
                    check_index("z", z, 0, n_cells.saturating_sub(1))?;
                }
            }
        }
        Ok(())
    }

    /// Drop every allocation.
    pub fn clear_allocations(&mut self) {
        for e in self.steps.iter_mut().flatten() {
            e.z = None;
        }
    }
}

/// Draw from `N₂(θ, φ² I)` truncated to `window` by rejection.
pub fn sample_truncated_kernel<R: Real, G: Rng + ?Sized>(
    theta: [R; 2],
    phi: R,
    window: &Rect<R>,
    rng: &mut G,
) -> Result<[R; 2]> {
    for _ in 0..MAX_REJECTIONS {
        let x = theta[0] + phi * R::std_normal_draw(rng);
        let y = theta[1] + phi * R::std_normal_draw(rng);
        if window.contains(x, y) {
            return Ok([x, y]);
        }
    }
    Err(Error::DegenerateKernel { tries: MAX_REJECTIONS })
}

/// Simulate the events of one time step given the latent weights.
pub fn simulate_points<R: Real, G: Rng + ?Sized>(
    w_t: &[R],
    kappa_t: R,
    grid: &Grid<R>,
    phi: R,
    rng: &mut G,
) -> Result<Vec<Event<R>>> {
    check_bandwidth(phi)?;
    if w_t.len() != grid.len() {
        return Err(Error::InvalidArgument("weight vector does not match the grid".into()));
    }
    let masses = cell_kernel_masses(grid, phi);
    simulate_points_with(w_t, kappa_t, grid, phi, &masses, rng)
}

pub(crate) fn simulate_points_with<R: Real, G: Rng + ?Sized>(
    w_t: &[R],
    kappa_t: R,
    grid: &Grid<R>,
    phi: R,
    masses: &[R],
    rng: &mut G,
) -> Result<Vec<Event<R>>> {
    let mut cum = Vec::with_capacity(w_t.len());
    let mut acc = R::zero();
    for (&w, &m) in w_t.iter().zip(masses) {
        acc = acc + w * m;
        cum.push(acc);
    }
    let total = kappa_t * acc;
    if !(total > R::zero()) {
        return Ok(Vec::new());
    }
    if !total.is_finite() {
        return Err(Error::Numerical(format!("infinite intensity {total}")));
    }
    let n = R::poisson_draw(total, rng);
    let window = grid.window();
    let mut events = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let u = R::unit_draw(rng) * acc;
        let j = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        let [x, y] = sample_truncated_kernel(grid.atoms()[j], phi, window, rng)?;
        debug_assert!(window.contains(x, y));
        events.push(Event { x, y, z: Some(j) });
    }
    Ok(events)
}

/// Full generative model: latent process, bandwidth, covariates and initial law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct ModelSpec<R: Real = f64> {
    pub latent: MargParams<R>,
    pub phi: R,
    pub covariates: CovariateModel<R>,
    pub init: InitialLaw<R>,
}

impl<R: Real> ModelSpec<R> {
    pub fn validate(&self) -> Result<()> {
        self.latent.validate()?;
        check_bandwidth(self.phi)?;
        self.covariates.validate()?;
        if self.covariates.horizon != self.latent.horizon {
            return Err(Error::InvalidParameter("covariate and latent horizons differ".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid<R> {
        &self.latent.grid
    }

    pub fn horizon(&self) -> usize {
        self.latent.horizon
    }

    pub fn kernel(&self) -> KernelSpec<R> {
        KernelSpec {
            bandwidth: self.phi,
            window: *self.latent.grid.window(),
        }
    }
}

/// Simulate a latent path and its point patterns.
///
/// Streams: `key/0` draws the initial measure, `key/1` the transitions and
/// `key/2/t` the events of step `t`, so the patterns are independent of one
/// another given the path.
pub fn simulate_series<R: Real>(spec: &ModelSpec<R>, key: SeedKey) -> Result<(LatentPath<R>, PointSeries<R>)> {
    spec.validate()?;
    let init = spec.init.draw(&spec.latent, key.child(0))?;
    let path = simulate_statespace(&init, &spec.latent, key.child(1))?;
    let points = simulate_points_given(&path, spec, key.child(2))?;
    Ok((path, points))
}

/// Simulate point patterns for every step of a given latent path.
pub fn simulate_points_given<R: Real>(path: &LatentPath<R>, spec: &ModelSpec<R>, key: SeedKey) -> Result<PointSeries<R>> {
    let grid = spec.grid();
    let masses = cell_kernel_masses(grid, spec.phi);
    let mut steps = Vec::with_capacity(path.horizon());
    for t in 1..=path.horizon() {
        let kappa = spec.covariates.kappa_at(t)?;
        let mut rng = key.at("t", t as u64).rng();
        steps.push(simulate_points_with(path.row(t), kappa, grid, spec.phi, &masses, &mut rng)?);
    }
    Ok(PointSeries { steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marg::ScaleRegime;

    fn unit_square() -> Rect<f64> {
        Rect::new(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn kernel_density_values() {
        let d = kernel_density([0.0, 0.0], [0.0, 0.0], 1.0);
        assert!((d - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        let d = kernel_density([1.0, 0.0], [0.0, 0.0], 0.5);
        assert!((d - (-2.0f64).exp() / (2.0 * std::f64::consts::PI * 0.25)).abs() < 1e-15);
        assert!((d - 0.0861571).abs() < 1e-6);
        let l: f64 = kernel_log_density([0.3, -0.2], [0.1, 0.4], 0.7);
        assert!((l - kernel_density::<f64>([0.3, -0.2], [0.1, 0.4], 0.7).ln()).abs() < 1e-13);
    }

    #[test]
    fn kernel_mass_limits() {
        assert!((kernel_mass::<f64>(&Rect::plane(), [0.3, 0.1], 0.2) - 1.0).abs() < 1e-15);
        let r = Rect::<f64>::new(-10.0, 10.0, -10.0, 10.0).unwrap();
        assert!((kernel_mass(&r, [0.0, 0.0], 1.0) - 1.0).abs() < 1e-8);
        let q = Rect { x0: 0.0, x1: f64::INFINITY, y0: 0.0, y1: f64::INFINITY };
        assert!((kernel_mass(&q, [0.0, 0.0], 0.3) - 0.25).abs() < 1e-10);
        let far = Rect::new(9.0, 10.0, 0.0, 1.0).unwrap();
        let m = kernel_mass(&far, [0.0, 0.5], 1.0);
        assert!(m > 0.0 && m < 1e-17);
    }

    #[test]
    fn kappa_designs() {
        let m = CovariateModel::new(CovariateDesign::dummy_default(), vec![0.0, 0.04, 1.367], 24).unwrap();
        assert!((kappa_eval(&m, 10).unwrap() - (0.4f64 + 1.367).exp()).abs() < 1e-12);
        assert!((kappa_eval(&m, 7).unwrap() - 0.28f64.exp()).abs() < 1e-12);
        assert!(kappa_eval(&m, 25).is_err());
        assert!(kappa_eval(&m, 0).is_err());
        let h = CovariateModel::new(CovariateDesign::harmonic_default(), vec![0.0; 10], 5).unwrap();
        assert_eq!(kappa_eval(&h, 3).unwrap(), 1.0);
        let row = h.design.row(1).unwrap();
        assert!((row[2] - (2.0 * std::f64::consts::PI * 0.086).sin()).abs() < 1e-15);
        assert!(CovariateModel::new(CovariateDesign::Trend, vec![0.0], 3).is_err());
    }

    #[test]
    fn intensity_matches_brute_force() {
        let g = Grid::uniform(unit_square(), 3, 3, 1.0).unwrap();
        let w: Vec<f64> = (0..9).map(|j| 0.1 + j as f64).collect();
        let y = [0.42, 0.77];
        let brute: f64 = (0..9).map(|j| w[j] * kernel_density(y, g.atoms()[j], 0.3)).sum();
        assert!((intensity_at(y, &w, 2.0, &g, 0.3) - 2.0 * brute).abs() < 1e-12 * brute);
        assert_eq!(intensity_at(y, &[0.0; 9], 2.0, &g, 0.3), 0.0);
        let mut e = vec![0.0; 9];
        e[4] = 1.0;
        let m = kernel_mass(g.window(), g.atoms()[4], 0.3);
        assert!((intensity_total(&e, 1.5, &g, 0.3) - 1.5 * m).abs() < 1e-15);
    }

    #[test]
    fn points_stay_in_window_and_single_cell_allocation() {
        let g = Grid::uniform(unit_square(), 1, 1, 1.0).unwrap();
        let mut rng = SeedKey::new(3).rng();
        let ev = simulate_points(&[50.0], 1.0, &g, 0.4, &mut rng).unwrap();
        assert!(!ev.is_empty());
        assert!(ev.iter().all(|e| e.z == Some(0) && g.window().contains(e.x, e.y)));
        assert!(simulate_points(&[0.0], 1.0, &g, 0.4, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn zero_kappa_gives_empty_pattern() {
        let g = Grid::uniform(unit_square(), 2, 2, 1.0).unwrap();
        let latent = MargParams::new(g, 1.0, ScaleRegime::Constant { c: 0.5 }, 3).unwrap();
        let rows = vec![vec![0.0], vec![-1e4], vec![0.0]];
        let spec = ModelSpec {
            latent,
            phi: 0.2,
            covariates: CovariateModel::new(CovariateDesign::Custom { rows }, vec![1.0], 3).unwrap(),
            init: InitialLaw::Stationary,
        };
        let (_, pts) = simulate_series(&spec, SeedKey::new(5)).unwrap();
        assert!(pts.at(2).is_empty());
        let (_, again) = simulate_series(&spec, SeedKey::new(5)).unwrap();
        assert_eq!(pts, again);
    }
}
