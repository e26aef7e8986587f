//! Closed-form moments of the latent measure and of the counting process,
//! the cross-pair correlation function, and fit diagnostics.
//!
//! Everything is a grid sum: with a discrete base measure the cells evolve
//! independently, so all second-order quantities reduce to per-cell weight
//! covariances `cov(w_{j,t}, w_{j,t+h}) = ρ_{t+h|t} var(w_{j,t})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Rect;
use crate::marg::{lag_recursion, InitialLaw, MargParams};
use crate::obs::{kernel_density, kernel_mass, ModelSpec};
use crate::real::Real;
use crate::stats;

/// Highest moment order supported by [`count_moment`].
pub const MAX_MOMENT_ORDER: usize = 6;

/// Which process a [`MomentReport`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentTarget {
    Latent,
    Counts,
}

/// A closed-form value with an optional Monte Carlo estimate beside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub target: MomentTarget,
    pub regions: Vec<Rect<f64>>,
    pub t: usize,
    pub h: usize,
    pub order: usize,
    pub closed_form: f64,
    pub mc_estimate: Option<f64>,
    pub mc_se: Option<f64>,
}

impl MomentReport {
    /// `|closed - mc| / se`, if an estimate is attached.
    pub fn z_score(&self) -> Option<f64> {
        match (self.mc_estimate, self.mc_se) {
            (Some(m), Some(se)) if se > 0.0 => Some((m - self.closed_form).abs() / se),
            _ => None,
        }
    }
}

fn check_len<R>(v: &[R], n: usize, what: &str) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} has {} entries, grid has {n} cells", v.len())))
    }
}

/// Per-cell `E(w_{j,t})` given per-cell `E(w_{j,1})`.
pub fn cell_means<R: Real>(t: usize, params: &MargParams<R>, w1_mean: &[R]) -> Result<Vec<R>> {
    check_len(w1_mean, params.grid.len(), "w1_mean")?;
    if t == 0 {
        return Err(Error::Index { what: "t", index: 0, lo: 1, hi: usize::MAX });
    }
    params.scales.at(t)?;
    let lag = lag_recursion(params.beta, &params.scales, 1, t - 1);
    Ok(params
        .grid
        .masses()
        .iter()
        .zip(w1_mean)
        .map(|(&a, &m)| lag.scale * a + lag.rho * m)
        .collect())
}

/// Per-cell `var(w_{j,t})` under the given initial law.
pub fn cell_variances<R: Real>(t: usize, params: &MargParams<R>, init: &InitialLaw<R>) -> Result<Vec<R>> {
    if t == 0 {
        return Err(Error::Index { what: "t", index: 0, lo: 1, hi: usize::MAX });
    }
    params.scales.at(t)?;
    let m1 = init.mean(params)?;
    let v1 = init.variance(params)?;
    check_len(&m1, params.grid.len(), "initial weights")?;
    let lag = lag_recursion(params.beta, &params.scales, 1, t - 1);
    let two = R::lit(2.0);
    Ok(params
        .grid
        .masses()
        .iter()
        .zip(m1.iter().zip(&v1))
        .map(|(&a, (&m, &v))| lag.scale * lag.scale * a + two * lag.scale * lag.rho * m + lag.rho * lag.rho * v)
        .collect())
}

/// `E(W_t(g)) = c_{t|1} Σ g_j α_j + ρ_{t|1} Σ g_j E(w_{j,1})`.
pub fn w_mean<R: Real>(g: &[R], t: usize, params: &MargParams<R>, w1_mean: &[R]) -> Result<R> {
    check_len(g, params.grid.len(), "g")?;
    let m = cell_means(t, params, w1_mean)?;
    Ok(g.iter().zip(&m).map(|(&a, &b)| a * b).sum())
}

/// `cov(W_t(g₁), W_{t+h}(g₂))`.
pub fn w_cov<R: Real>(g1: &[R], g2: &[R], t: usize, h: usize, params: &MargParams<R>, init: &InitialLaw<R>) -> Result<R> {
    let n = params.grid.len();
    check_len(g1, n, "g1")?;
    check_len(g2, n, "g2")?;
    params.scales.at(t + h)?;
    let v = cell_variances(t, params, init)?;
    let rho = lag_recursion(params.beta, &params.scales, t, h).rho;
    Ok(rho * g1.iter().zip(g2).zip(&v).map(|((&a, &b), &s)| a * b * s).sum::<R>())
}

fn kernel_row<R: Real>(y: [R; 2], spec: &ModelSpec<R>) -> Vec<R> {
    spec.grid().atoms().iter().map(|&a| kernel_density(y, a, spec.phi)).collect()
}

fn region_masses<R: Real>(b: &Rect<R>, spec: &ModelSpec<R>) -> Vec<R> {
    match b.intersect(spec.grid().window()) {
        Some(r) => spec.grid().atoms().iter().map(|&a| kernel_mass(&r, a, spec.phi)).collect(),
        None => vec![R::zero(); spec.grid().len()],
    }
}

fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// First-order intensity `D¹_t(y) = κ_t E(λ_t(y))`.
pub fn intensity_d1<R: Real>(y: [R; 2], t: usize, spec: &ModelSpec<R>) -> Result<R> {
    let kappa = spec.covariates.kappa_at(t)?;
    let m = cell_means(t, &spec.latent, &spec.init.mean(&spec.latent)?)?;
    Ok(kappa * dot(&kernel_row(y, spec), &m))
}

/// Second-order product density `D²_{t,t+h}(y₁, y₂) = κ_t κ_{t+h} E(λ_t(y₁) λ_{t+h}(y₂))`;
/// `h = 0` gives the within-time density of distinct points.
pub fn product_density_d2<R: Real>(y1: [R; 2], y2: [R; 2], t: usize, h: usize, spec: &ModelSpec<R>) -> Result<R> {
    let k1 = kernel_row(y1, spec);
    let k2 = kernel_row(y2, spec);
    second_moment(&k1, &k2, t, h, spec)
}

/// `κ_t κ_{t+h} Σ_{j,k} a_j b_k E(w_{j,t} w_{k,t+h})`.
fn second_moment<R: Real>(a: &[R], b: &[R], t: usize, h: usize, spec: &ModelSpec<R>) -> Result<R> {
    let p = &spec.latent;
    let w1 = spec.init.mean(p)?;
    let m_t = cell_means(t, p, &w1)?;
    let m_th = cell_means(t + h, p, &w1)?;
    let cov = w_cov(a, b, t, h, p, &spec.init)?;
    let kk = spec.covariates.kappa_at(t)? * spec.covariates.kappa_at(t + h)?;
    Ok(kk * (dot(a, &m_t) * dot(b, &m_th) + cov))
}

/// Cross-pair correlation `R_{t,t+h}(y₁, y₂) = D² / (D¹_t(y₁) D¹_{t+h}(y₂))`.
pub fn pair_correlation<R: Real>(y1: [R; 2], y2: [R; 2], t: usize, h: usize, spec: &ModelSpec<R>) -> Result<R> {
    let d1a = intensity_d1(y1, t, spec)?;
    let d1b = intensity_d1(y2, t + h, spec)?;
    if !(d1a > R::zero() && d1b > R::zero()) {
        return Err(Error::UndefinedRatio(format!(
            "intensity vanishes at ({}, {}) or ({}, {})",
            y1[0], y1[1], y2[0], y2[1]
        )));
    }
    // 1 + κκ cov / (D¹ D¹), so the excess over 1 keeps the sign of the covariance.
    let k1 = kernel_row(y1, spec);
    let k2 = kernel_row(y2, spec);
    let kk = spec.covariates.kappa_at(t)? * spec.covariates.kappa_at(t + h)?;
    let cov = w_cov(&k1, &k2, t, h, &spec.latent, &spec.init)?;
    Ok(R::one() + kk * cov / (d1a * d1b))
}

/// `E(N_t(B))`.
pub fn count_mean<R: Real>(b: &Rect<R>, t: usize, spec: &ModelSpec<R>) -> Result<R> {
    let kappa = spec.covariates.kappa_at(t)?;
    let m = cell_means(t, &spec.latent, &spec.init.mean(&spec.latent)?)?;
    Ok(kappa * dot(&region_masses(b, spec), &m))
}

/// `cov(N_t(B₁), N_{t+h}(B₂))`, including the Poisson overlap term at `h = 0`.
pub fn count_cov<R: Real>(b1: &Rect<R>, b2: &Rect<R>, t: usize, h: usize, spec: &ModelSpec<R>) -> Result<R> {
    let k1 = region_masses(b1, spec);
    let k2 = region_masses(b2, spec);
    let kk = spec.covariates.kappa_at(t)? * spec.covariates.kappa_at(t + h)?;
    let cov = kk * w_cov(&k1, &k2, t, h, &spec.latent, &spec.init)?;
    if h > 0 {
        return Ok(cov);
    }
    let overlap = match b1.intersect(b2) {
        Some(r) => count_mean(&r, t, spec)?,
        None => R::zero(),
    };
    Ok(overlap + cov)
}

/// Stirling number of the second kind `S(m, j)`, `0 ≤ j ≤ m ≤ 6`.
pub fn stirling2(m: usize, j: usize) -> Result<u64> {
    if m > MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder(m));
    }
    if j > m {
        return Err(Error::InvalidArgument(format!("S({m}, {j}) needs j <= m")));
    }
    let mut s = vec![vec![0u64; m + 1]; m + 1];
    s[0][0] = 1;
    for n in 1..=m {
        for k in 1..=n {
            s[n][k] = k as u64 * s[n - 1][k] + s[n - 1][k - 1];
        }
    }
    Ok(s[m][j])
}

/// All partitions of `n` as multiplicity vectors `ℓ` (`ℓ[r]` parts of size `r`).
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for r in (1..=max.min(rest)).rev() {
            cur[r] += 1;
            rec(rest - r, r, cur, out);
            cur[r] -= 1;
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut vec![0; n + 1], &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Cumulants `J_r(B) = Γ(r) c^r (1-ρ)^{-r} Σ_j α_j K_φ(B, θ_j)^r` of `λ_t(B)`
/// under the stationary law, `r = 1..=m`.
pub fn count_cumulants<R: Real>(b: &Rect<R>, m: usize, spec: &ModelSpec<R>) -> Result<Vec<R>> {
    let p = &spec.latent;
    let c = p.scales.constant().ok_or(Error::UnsupportedRegime)?;
    let rho = p.beta * c;
    if !(rho < R::one()) {
        return Err(Error::Stationarity { rho: rho.as_f64() });
    }
    let scale = c / (R::one() - rho);
    let k = region_masses(b, spec);
    Ok((1..=m)
        .map(|r| {
            let g = R::from_count(r).lgamma().exp();
            let s: R = p.grid.masses().iter().zip(&k).map(|(&a, &kb)| a * kb.powi(r as i32)).sum();
            g * scale.powi(r as i32) * s
        })
        .collect())
}

/// Raw moment `E(N_t(B)^m)` of the stationary count, `m ≤ 6`.
pub fn count_moment<R: Real>(b: &Rect<R>, m: usize, t: usize, spec: &ModelSpec<R>) -> Result<R> {
    if m > MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder(m));
    }
    if m == 0 {
        return Ok(R::one());
    }
    let kappa = spec.covariates.kappa_at(t)?;
    let j_r = count_cumulants(b, m, spec)?;
    let mut total = R::zero();
    for j in 1..=m {
        let mut factorial_moment = R::zero();
        for l in partitions(j) {
            let mut coef = factorial(j);
            let mut prod = R::one();
            for (r, &lr) in l.iter().enumerate().skip(1) {
                coef /= factorial(r).powi(lr as i32) * factorial(lr);
                prod = prod * j_r[r - 1].powi(lr as i32);
            }
            factorial_moment = factorial_moment + R::lit(coef) * prod;
        }
        let s = R::from_u64(stirling2(m, j)?).expect("small integer");
        total = total + s * kappa.powi(j as i32) * factorial_moment;
    }
    Ok(total)
}

/// Mean squared and mean absolute error of fitted totals against counts.
pub fn fit_diagnostics(counts: &[f64], fitted: &[f64]) -> Result<(f64, f64)> {
    if counts.len() != fitted.len() || counts.is_empty() {
        return Err(Error::InvalidArgument("counts and fitted must be nonempty and equal-length".into()));
    }
    let n = counts.len() as f64;
    let mse = counts.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    let mae = counts.iter().zip(fitted).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    Ok((mse, mae))
}

/// Posterior coefficient of variation, `sd / mean`.
pub fn cv_field(draws: &[f64]) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::NoDraws);
    }
    let (m, v) = stats::mean_var(draws);
    if m == 0.0 {
        return if v == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::UndefinedRatio("posterior mean is zero".into()))
        };
    }
    Ok(v.sqrt() / m.abs())
}

/// Normalised interquantile range `(Q97.5 - Q2.5) / Q50`.
pub fn iqr_norm(draws: &[f64]) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::NoDraws);
    }
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    let q50 = stats::quantile_sorted(&v, 0.5);
    if q50 == 0.0 {
        return Err(Error::UndefinedRatio("median is zero".into()));
    }
    Ok((stats::quantile_sorted(&v, 0.975) - stats::quantile_sorted(&v, 0.025)) / q50)
}
