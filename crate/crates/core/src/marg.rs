//! Measure-valued autoregressive gamma process on a grid base measure.
//!
//! With a discrete base measure `H = Σ_j α_j δ_{θ_j}` the latent measure is a
//! vector of scalar weights `w_{j,t}`, each following
//! `w_{j,t+1} | w_{j,t} ~ NcGa(α_j, β w_{j,t}, c_{t+1})` (scale `c_{t+1}`).
//! Time is 1-based throughout: `t = 1` is the initial measure.

use serde::{Deserialize, Serialize};

use crate::dists::{ncgamma_unchecked, poisson_unchecked};
use crate::error::{check_index, Error, Result};
use crate::grid::Grid;
use crate::real::Real;
use crate::rng::SeedKey;

/// Calendar month (1..=12) of time step `t` for a series starting in `start_month`.
#[inline]
pub fn month_of(t: usize, start_month: u32) -> usize {
    (t + start_month as usize - 2) % 12 + 1
}

/// Scale sequence `c_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleRegime<R: Real = f64> {
    Constant { c: R },
    TimeVarying { c: Vec<R> },
    /// `c_t = ξ_k` with `k` the calendar month of `t`.
    Monthly { xi: [R; 12], start_month: u32 },
}

impl<R: Real> ScaleRegime<R> {
    pub fn validate(&self) -> Result<()> {
        let bad = |v: &R| !(*v > R::zero() && v.is_finite());
        match self {
            ScaleRegime::Constant { c } if bad(c) => {
                Err(Error::InvalidParameter(format!("scale must be > 0, got {c}")))
            }
            ScaleRegime::TimeVarying { c } if c.is_empty() || c.iter().any(bad) => Err(
                Error::InvalidParameter("time-varying scales must be nonempty and > 0".into()),
            ),
            ScaleRegime::Monthly { xi, .. } if xi.iter().any(bad) => {
                Err(Error::InvalidParameter("monthly scales must be > 0".into()))
            }
            ScaleRegime::Monthly { start_month, .. } if !(1..=12).contains(start_month) => Err(
                Error::InvalidParameter(format!("start month {start_month} not in 1..=12")),
            ),
            _ => Ok(()),
        }
    }

    /// `c_t` for 1-based `t`.
    pub fn at(&self, t: usize) -> Result<R> {
        match self {
            ScaleRegime::Constant { c } => {
                check_index("t", t, 1, usize::MAX)?;
                Ok(*c)
            }
            ScaleRegime::TimeVarying { c } => {
                check_index("t", t, 1, c.len())?;
                Ok(c[t - 1])
            }
            ScaleRegime::Monthly { xi, start_month } => {
                check_index("t", t, 1, usize::MAX)?;
                Ok(xi[month_of(t, *start_month) - 1])
            }
        }
    }

    #[inline]
    pub(crate) fn at_unchecked(&self, t: usize) -> R {
        match self {
            ScaleRegime::Constant { c } => *c,
            ScaleRegime::TimeVarying { c } => c[t - 1],
            ScaleRegime::Monthly { xi, start_month } => xi[month_of(t, *start_month) - 1],
        }
    }

    pub fn constant(&self) -> Option<R> {
        match self {
            ScaleRegime::Constant { c } => Some(*c),
            _ => None,
        }
    }

    /// Flat view of the free scale values.
    pub fn values(&self) -> Vec<R> {
        match self {
            ScaleRegime::Constant { c } => vec![*c],
            ScaleRegime::TimeVarying { c } => c.clone(),
            ScaleRegime::Monthly { xi, .. } => xi.to_vec(),
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [R] {
        match self {
            ScaleRegime::Constant { c } => std::slice::from_mut(c),
            ScaleRegime::TimeVarying { c } => c,
            ScaleRegime::Monthly { xi, .. } => xi,
        }
    }
}

/// Parameters of the latent process on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct MargParams<R: Real = f64> {
    pub grid: Grid<R>,
    pub beta: R,
    pub scales: ScaleRegime<R>,
    pub horizon: usize,
}

impl<R: Real> MargParams<R> {
    pub fn new(grid: Grid<R>, beta: R, scales: ScaleRegime<R>, horizon: usize) -> Result<Self> {
        let p = MargParams {
            grid,
            beta,
            scales,
            horizon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > R::zero() && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon T must be >= 1".into()));
        }
        self.scales.validate()?;
        if let ScaleRegime::TimeVarying { c } = &self.scales {
            if c.len() < self.horizon {
                return Err(Error::InvalidParameter(format!(
                    "{} time-varying scales for horizon {}",
                    c.len(),
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    /// `ρ = βc` for a constant regime.
    pub fn stationary_rho(&self) -> Option<R> {
        self.scales.constant().map(|c| self.beta * c)
    }
}

/// Lag-`h` transition parameters `(ρ_{t+h|t}, c_{t+h|t}, β_{t+h|t})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagParams<R: Real = f64> {
    pub rho: R,
    pub scale: R,
    pub beta: R,
}

/// Backward recursion `c_{s+1|t} = c_{s+1} + ρ_{s+1} c_{s|t}` from `c_{t|t} = 0`,
/// `ρ_{t|t} = 1`; `h = 0` returns that convention.
pub(crate) fn lag_recursion<R: Real>(beta: R, scales: &ScaleRegime<R>, t: usize, h: usize) -> LagParams<R> {
    let mut rho = R::one();
    let mut scale = R::zero();
    for s in (t + 1)..=(t + h) {
        let c = scales.at_unchecked(s);
        let r = beta * c;
        scale = c + r * scale;
        rho = rho * r;
    }
    LagParams {
        rho,
        scale,
        beta: rho / scale,
    }
}

pub fn lag_params<R: Real>(t: usize, h: usize, params: &MargParams<R>) -> Result<LagParams<R>> {
    check_index("t", t, 1, params.horizon)?;
    if h == 0 {
        return Err(Error::Index { what: "h", index: 0, lo: 1, hi: params.horizon.saturating_sub(t) });
    }
    check_index("t + h", t + h, t + 1, params.horizon)?;
    Ok(lag_recursion(params.beta, &params.scales, t, h))
}

/// `T × N^g` array of latent weights, stored row-major by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct LatentPath<R: Real = f64> {
    n_cells: usize,
    horizon: usize,
    weights: Vec<R>,
}

impl<R: Real> LatentPath<R> {
    pub fn zeros(horizon: usize, n_cells: usize) -> Self {
        LatentPath {
            n_cells,
            horizon,
            weights: vec![R::zero(); horizon * n_cells],
        }
    }

    pub fn from_rows(rows: Vec<Vec<R>>) -> Result<Self> {
        let horizon = rows.len();
        let n_cells = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cells) {
            return Err(Error::InvalidArgument("ragged latent path rows".into()));
        }
        let weights: Vec<R> = rows.into_iter().flatten().collect();
        if weights.iter().any(|w| !(w.is_finite() && *w >= R::zero())) {
            return Err(Error::InvalidArgument("latent weights must be finite and >= 0".into()));
        }
        Ok(LatentPath {
            n_cells,
            horizon,
            weights,
        })
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Weights at 1-based time `t`.
    #[inline]
    pub fn row(&self, t: usize) -> &[R] {
        &self.weights[(t - 1) * self.n_cells..t * self.n_cells]
    }

    #[inline]
    pub fn row_mut(&mut self, t: usize) -> &mut [R] {
        &mut self.weights[(t - 1) * self.n_cells..t * self.n_cells]
    }

    #[inline]
    pub fn get(&self, t: usize, j: usize) -> R {
        self.weights[(t - 1) * self.n_cells + j]
    }

    #[inline]
    pub fn set(&mut self, t: usize, j: usize, w: R) {
        self.weights[(t - 1) * self.n_cells + j] = w;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[R]> {
        self.weights.chunks(self.n_cells.max(1))
    }

    pub fn as_slice(&self) -> &[R] {
        &self.weights
    }

    /// Multiply every weight by `s`.
    pub(crate) fn scale_all(&mut self, s: R) {
        for w in &mut self.weights {
            *w = *w * s;
        }
    }
}

/// Law of the initial measure `W_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw<R: Real = f64> {
    /// Deterministic initial weights.
    Fixed { weights: Vec<R> },
    /// Stationary gamma law `Gamma(α_j, rate (1 - ρ)/c)`; constant regime, `ρ < 1`.
    Stationary,
    /// Innovation-only law `Gamma(α_j, rate 1/c_1)`.
    Innovation,
}

impl<R: Real> InitialLaw<R> {
    /// Per-cell gamma scale of a random initial law (`None` for fixed weights).
    pub fn gamma_scale(&self, params: &MargParams<R>) -> Result<Option<R>> {
        match self {
            InitialLaw::Fixed { .. } => Ok(None),
            InitialLaw::Stationary => {
                let c = params.scales.constant().ok_or(Error::UnsupportedRegime)?;
                let rho = params.beta * c;
                if !(rho < R::one()) {
                    return Err(Error::Stationarity { rho: rho.as_f64() });
                }
                Ok(Some(c / (R::one() - rho)))
            }
            InitialLaw::Innovation => Ok(Some(params.scales.at(1)?)),
        }
    }

    /// `E(w_{j,1})` per cell.
    pub fn mean(&self, params: &MargParams<R>) -> Result<Vec<R>> {
        match self {
            InitialLaw::Fixed { weights } => Ok(weights.clone()),
            _ => {
                let s = self.gamma_scale(params)?.expect("random law");
                Ok(params.grid.masses().iter().map(|&a| a * s).collect())
            }
        }
    }

    /// `var(w_{j,1})` per cell (cells are independent).
    pub fn variance(&self, params: &MargParams<R>) -> Result<Vec<R>> {
        match self {
            InitialLaw::Fixed { weights } => Ok(vec![R::zero(); weights.len()]),
            _ => {
                let s = self.gamma_scale(params)?.expect("random law");
                Ok(params.grid.masses().iter().map(|&a| a * s * s).collect())
            }
        }
    }

    pub fn draw(&self, params: &MargParams<R>, key: SeedKey) -> Result<Vec<R>> {
        match self {
            InitialLaw::Fixed { weights } => {
                if weights.len() != params.grid.len() {
                    return Err(Error::InvalidArgument("initial weights do not match the grid".into()));
                }
                Ok(weights.clone())
            }
            InitialLaw::Stationary => stationary_init(params, key),
            InitialLaw::Innovation => {
                let c1 = params.scales.at(1)?;
                Ok(gamma_vector(params.grid.masses(), c1, key))
            }
        }
    }
}

fn gamma_vector<R: Real>(shapes: &[R], scale: R, key: SeedKey) -> Vec<R> {
    shapes
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            if a == R::zero() {
                R::zero()
            } else {
                R::gamma_draw(a, scale, &mut key.at("j", j as u64).rng())
            }
        })
        .collect()
}

fn check_init<R: Real>(init: &[R], params: &MargParams<R>) -> Result<()> {
    params.validate()?;
    if init.len() != params.grid.len() {
        return Err(Error::InvalidArgument(format!(
            "initial vector has {} entries, grid has {} cells",
            init.len(),
            params.grid.len()
        )));
    }
    if init.iter().any(|w| !(w.is_finite() && *w >= R::zero())) {
        return Err(Error::InvalidArgument("initial weights must be finite and >= 0".into()));
    }
    Ok(())
}

/// Forward simulation through the Poisson auxiliary variables:
/// `v ~ Poi(β w_{j,t})`, `w_{j,t+1} ~ Gamma(α_j + v, scale c_{t+1})`.
///
/// The draw for cell `j` at step `t` uses the stream `key/t/j`.
pub fn simulate_statespace<R: Real>(init: &[R], params: &MargParams<R>, key: SeedKey) -> Result<LatentPath<R>> {
    check_init(init, params)?;
    let n = params.grid.len();
    let mut path = LatentPath::zeros(params.horizon, n);
    path.row_mut(1).copy_from_slice(init);
    let alpha = params.grid.masses();
    for t in 2..=params.horizon {
        let c = params.scales.at(t)?;
        let kt = key.at("t", t as u64);
        for j in 0..n {
            let mut rng = kt.at("j", j as u64).rng();
            let prev = path.get(t - 1, j);
            let v = poisson_unchecked(params.beta * prev, &mut rng);
            let shape = alpha[j] + R::from_u64(v).expect("count");
            let w = if shape == R::zero() {
                R::zero()
            } else {
                R::gamma_draw(shape, c, &mut rng)
            };
            path.set(t, j, w);
        }
    }
    Ok(path)
}

/// Forward simulation through the thinning representation:
/// `w_{j,t+1} = u + g` with `u ~ NcGa(0, β w_{j,t}, c_{t+1})` and
/// `g ~ Gamma(α_j, scale c_{t+1})` independent.
pub fn simulate_thinning<R: Real>(init: &[R], params: &MargParams<R>, key: SeedKey) -> Result<LatentPath<R>> {
    check_init(init, params)?;
    let n = params.grid.len();
    let mut path = LatentPath::zeros(params.horizon, n);
    path.row_mut(1).copy_from_slice(init);
    let alpha = params.grid.masses();
    for t in 2..=params.horizon {
        let c = params.scales.at(t)?;
        let kt = key.at("t", t as u64);
        for j in 0..n {
            let mut rng = kt.at("j", j as u64).rng();
            let survivor = ncgamma_unchecked(R::zero(), params.beta * path.get(t - 1, j), c, &mut rng);
            let innovation = if alpha[j] == R::zero() {
                R::zero()
            } else {
                R::gamma_draw(alpha[j], c, &mut rng)
            };
            path.set(t, j, survivor + innovation);
        }
    }
    Ok(path)
}

/// Draw `W_1` from the invariant law `Gamma(α_j, rate (1 - ρ)/c)`.
pub fn stationary_init<R: Real>(params: &MargParams<R>, key: SeedKey) -> Result<Vec<R>> {
    let c = params.scales.constant().ok_or(Error::UnsupportedRegime)?;
    let rho = params.beta * c;
    if !(rho < R::one()) {
        return Err(Error::Stationarity { rho: rho.as_f64() });
    }
    Ok(gamma_vector(params.grid.masses(), c / (R::one() - rho), key))
}

/// `E(w_{j,t+h} | w_t) = c_{t+h|t} α_j + ρ_{t+h|t} w_{j,t}`.
pub fn conditional_mean<R: Real>(w_t: &[R], t: usize, h: usize, params: &MargParams<R>) -> Result<Vec<R>> {
    let lag = lag_params(t, h, params)?;
    if w_t.len() != params.grid.len() {
        return Err(Error::InvalidArgument("weight vector does not match the grid".into()));
    }
    Ok(params
        .grid
        .masses()
        .iter()
        .zip(w_t)
        .map(|(&a, &w)| lag.scale * a + lag.rho * w)
        .collect())
}

/// Closed-form conditional Laplace functional `E(exp(-Σ_j f_j w_{j,t+h}) | w_t)`.
pub fn laplace_functional_exact<R: Real>(
    t: usize,
    h: usize,
    w_t: &[R],
    f: &[R],
    params: &MargParams<R>,
) -> Result<R> {
    let lag = lag_params(t, h, params)?;
    let n = params.grid.len();
    if w_t.len() != n || f.len() != n {
        return Err(Error::InvalidArgument("w_t and f must match the grid".into()));
    }
    if f.iter().any(|v| !(*v >= R::zero())) {
        return Err(Error::InvalidArgument("f must be nonnegative".into()));
    }
    let mut expo = R::zero();
    for ((&a, &w), &fj) in params.grid.masses().iter().zip(w_t).zip(f) {
        let d = R::one() + lag.scale * fj;
        expo = expo + a * d.ln() + lag.rho * fj * w / d;
    }
    Ok((-expo).exp())
}

/// Monte Carlo Laplace functional at time `t` over a set of paths: returns the
/// sample mean of `exp(-Σ_j f_j w_{j,t})` and its standard error.
pub fn laplace_functional_mc<R: Real>(paths: &[LatentPath<R>], t: usize, f: &[R]) -> Result<(R, R)> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no paths".into()));
    }
    let vals: Vec<f64> = paths
        .iter()
        .map(|p| {
            let s: R = p.row(t).iter().zip(f).map(|(&w, &fj)| w * fj).sum();
            (-s).exp().as_f64()
        })
        .collect();
    let (m, se) = crate::stats::mean_se(&vals);
    Ok((R::lit(m), R::lit(se)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Rect;

    fn params(alpha: f64, beta: f64, c: f64, horizon: usize) -> MargParams<f64> {
        let g = Grid::uniform(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 1, 1, alpha).unwrap();
        MargParams::new(g, beta, ScaleRegime::Constant { c }, horizon).unwrap()
    }

    #[test]
    fn month_mapping() {
        assert_eq!(month_of(1, 1), 1);
        assert_eq!(month_of(12, 1), 12);
        assert_eq!(month_of(13, 1), 1);
        assert_eq!(month_of(1, 8), 8);
        assert_eq!(month_of(6, 8), 1);
        let r = ScaleRegime::Monthly {
            xi: [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0],
            start_month: 1,
        };
        assert_eq!(r.at(12).unwrap(), 12.0);
        assert_eq!(r.at(24).unwrap(), 12.0);
        assert_eq!(r.at(25).unwrap(), 1.0);
    }

    #[test]
    fn lag_one_is_the_convention() {
        let p = params(1.0, 0.8, 0.5, 10);
        let l = lag_params(2, 1, &p).unwrap();
        assert_eq!((l.rho, l.scale, l.beta), (0.4, 0.5, 0.8));
    }

    #[test]
    fn lag_constant_closed_form() {
        let p = params(1.0, 1.2, 0.5, 10);
        let rho: f64 = 0.6;
        let l = lag_params(1, 3, &p).unwrap();
        assert!(((l.rho - rho.powi(3)) / rho.powi(3)).abs() < 1e-12);
        let want = 0.5 * (1.0 - rho.powi(3)) / (1.0 - rho);
        assert!(((l.scale - want) / want).abs() < 1e-12);
    }

    #[test]
    fn lag_time_varying_example() {
        let g = Grid::uniform(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 1, 1, 1.0).unwrap();
        let p: MargParams<f64> = MargParams::new(g, 1.0, ScaleRegime::TimeVarying { c: vec![0.1, 0.2, 0.3] }, 3).unwrap();
        let l = lag_params(1, 2, &p).unwrap();
        assert!((l.scale - 0.36).abs() < 1e-15);
        assert!((l.rho - 0.06).abs() < 1e-15);
    }

    #[test]
    fn lag_index_errors() {
        let p = params(1.0, 1.0, 0.5, 5);
        assert!(lag_params(0, 1, &p).is_err());
        assert!(lag_params(1, 0, &p).is_err());
        assert!(lag_params(3, 3, &p).is_err());
        assert!(lag_params(4, 1, &p).is_ok());
    }

    #[test]
    fn absorbing_zero_path() {
        let g = Grid::uniform(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 2, 2, 1.0)
            .unwrap()
            .with_masses_allow_zero(vec![0.0; 4])
            .unwrap();
        let p = MargParams::new(g, 1.0, ScaleRegime::Constant { c: 0.5 }, 8).unwrap();
        let a = simulate_statespace(&[0.0; 4], &p, SeedKey::new(1)).unwrap();
        let b = simulate_thinning(&[0.0; 4], &p, SeedKey::new(1)).unwrap();
        assert!(a.as_slice().iter().all(|&w| w == 0.0));
        assert!(b.as_slice().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn stationary_init_errors() {
        assert!(matches!(
            stationary_init(&params(1.0, 2.0, 0.5, 3), SeedKey::new(0)),
            Err(Error::Stationarity { .. })
        ));
        let g = Grid::uniform(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 1, 1, 1.0).unwrap();
        let p = MargParams::new(g, 1.0, ScaleRegime::TimeVarying { c: vec![0.1; 3] }, 3).unwrap();
        assert!(matches!(stationary_init(&p, SeedKey::new(0)), Err(Error::UnsupportedRegime)));
    }

    #[test]
    fn conditional_mean_geometric_limit() {
        let p = params(1.3, 1.0, 0.5, 250);
        let m = conditional_mean(&[4.0], 1, 200, &p).unwrap();
        let want = 1.3 * 0.5 / 0.5;
        assert!((m[0] - want).abs() < 1e-8);
        let z = conditional_mean(&[0.0], 1, 3, &params(1e-300, 1.0, 0.5, 5)).unwrap();
        assert!(z[0].abs() < 1e-299);
    }

    #[test]
    fn laplace_exact_special_cases() {
        let p = params(1.0, 1.0, 0.4, 4);
        assert_eq!(laplace_functional_exact(1, 2, &[1.2], &[0.0], &p).unwrap(), 1.0);
        let lag = lag_params(1, 2, &p).unwrap();
        let v = laplace_functional_exact(1, 2, &[0.0], &[0.7], &p).unwrap();
        assert!((v - 1.0 / (1.0 + lag.scale * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn simulation_is_reproducible() {
        let p = params(1.0, 1.0, 0.5, 10);
        let a = simulate_statespace(&[1.0], &p, SeedKey::new(9)).unwrap();
        let b = simulate_statespace(&[1.0], &p, SeedKey::new(9)).unwrap();
        assert_eq!(a, b);
    }
}
