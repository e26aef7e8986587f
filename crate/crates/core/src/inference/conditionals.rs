//! Complete-data likelihood, full conditionals and the Metropolis–Hastings
//! updates of the static parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dists::{gamma_logpdf, ln_ncgamma};
use crate::error::{Error, Result};
use crate::inference::adapt::AdaptiveStep;
use crate::inference::priors::Priors;
use crate::inference::state::{initial_scale, kappa_from, ChainState, InferenceData, RegimeKind};
use crate::marg::{LatentPath, ScaleRegime};
use crate::obs::{cell_kernel_masses, kernel_log_density};
use crate::real::Real;

/// Target used for the bandwidth update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiTarget {
    /// Exact complete-data conditional, including the `e^{-Λ_t(𝕐)}` count terms.
    #[default]
    Exact,
    /// Product of truncated kernel densities at the allocated events only.
    Truncation,
    /// Allocations integrated out: each event contributes
    /// `ln Σ_j w_{j,t} K_φ(y_i, θ_j)`. The sweep redraws the allocations
    /// immediately after this move.
    Marginal,
}

/// A Metropolis–Hastings move on part of the static parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Alpha(usize),
    Beta,
    /// Free scale value `k` (0-based): `c`, `c_{k+1}` or `ξ_{k+1}`.
    Scale(usize),
    R,
    Phi,
    Eta,
    /// Joint rescaling `(w, c, β, η₀) → (s w, s c, β/s, η₀ - ln s)`, which
    /// leaves every intensity unchanged.
    Ridge,
}

// ---------------------------------------------------------------------------
// Likelihood pieces

/// Initial-law plus transition log-density of cell `j`.
pub(crate) fn cell_transition_ll(path: &LatentPath<f64>, j: usize, alpha: f64, beta: f64, scales: &ScaleRegime<f64>) -> f64 {
    let s1 = initial_scale(beta, scales);
    let mut ll = gamma_logpdf(path.get(1, j), alpha, 1.0 / s1);
    let mut prev = path.get(1, j);
    for t in 2..=path.horizon() {
        let w = path.get(t, j);
        ll += ln_ncgamma(w, alpha, beta * prev, scales.at_unchecked(t));
        prev = w;
    }
    ll
}

pub(crate) fn transition_ll(path: &LatentPath<f64>, alpha: &[f64], beta: f64, scales: &ScaleRegime<f64>) -> f64 {
    (0..path.n_cells()).map(|j| cell_transition_ll(path, j, alpha[j], beta, scales)).sum()
}

/// Log-density contribution of step `t` across cells when `c_t = c` (and the
/// regime is not constant, so `t = 1` uses the innovation law).
fn step_transition_ll(path: &LatentPath<f64>, t: usize, alpha: &[f64], beta: f64, c: f64) -> f64 {
    let row = path.row(t);
    if t == 1 {
        return row.iter().zip(alpha).map(|(&w, &a)| gamma_logpdf(w, a, 1.0 / c)).sum();
    }
    let prev = path.row(t - 1);
    row.iter()
        .zip(prev)
        .zip(alpha)
        .map(|((&w, &p), &a)| ln_ncgamma(w, a, beta * p, c))
        .sum()
}

/// `S_t = Σ_j w_{j,t} K_φ(𝕐, θ_j)`.
fn smoothed_totals(path: &LatentPath<f64>, masses: &[f64]) -> Vec<f64> {
    path.rows().map(|r| r.iter().zip(masses).map(|(w, m)| w * m).sum()).collect()
}

/// Σ over allocated events of `‖y - θ_z‖²`, and the event count.
fn allocated_sq_dist(state: &ChainState, data: &InferenceData) -> (f64, usize) {
    let atoms = data.grid.atoms();
    let mut s = 0.0;
    let mut n = 0;
    for t in 1..=data.horizon() {
        for (e, &z) in data.series.at(t).iter().zip(&state.alloc[t - 1]) {
            let dx = e.x - atoms[z][0];
            let dy = e.y - atoms[z][1];
            s += dx * dx + dy * dy;
            n += 1;
        }
    }
    (s, n)
}

/// Complete-data log-likelihood
/// `Σ_t [-Λ_t - ln N_t! + Σ_i ln(κ_t w_{z_i,t} K_φ(y_i, θ_{z_i}))]` plus the
/// latent initial and transition log-densities.
pub fn complete_loglik(state: &ChainState, data: &InferenceData) -> f64 {
    let masses = state.window_masses(data);
    let kappas = state.kappas(data);
    let totals = smoothed_totals(&state.path, &masses);
    let atoms = data.grid.atoms();
    let mut ll = 0.0;
    for t in 1..=data.horizon() {
        let kappa = kappas[t - 1];
        ll -= kappa * totals[t - 1] + data.log_factorial(t);
        let row = state.path.row(t);
        for (e, &z) in data.series.at(t).iter().zip(&state.alloc[t - 1]) {
            ll += (kappa * row[z]).ln() + kernel_log_density(e.location(), atoms[z], state.phi);
        }
    }
    if ll == f64::NEG_INFINITY {
        return ll;
    }
    ll + transition_ll(&state.path, &state.alpha, state.beta, &state.scales)
}

/// Log prior density of every static parameter (up to constants in η).
pub fn log_prior(state: &ChainState, priors: &Priors) -> f64 {
    let g = state.gamma;
    let mut lp = gamma_logpdf(g, priors.a_gamma, priors.b_gamma)
        + state.alpha.iter().map(|&a| priors.alpha_log_prior(a, g)).sum::<f64>()
        + priors.beta_log_prior(state.beta, g)
        + priors.phi_log_prior(state.phi)
        + priors.eta_log_prior(&state.eta);
    lp += state.scales.values().iter().map(|&c| priors.scale_log_prior(c, state.r)).sum::<f64>();
    if let Some(r) = state.r {
        lp += priors.r_log_prior(r);
    }
    lp
}

// ---------------------------------------------------------------------------
// Full-conditional targets

fn with_scale_value(scales: &ScaleRegime<f64>, k: usize, v: f64) -> ScaleRegime<f64> {
    let mut s = scales.clone();
    s.values_mut()[k] = v;
    s
}

fn alpha_target(state: &ChainState, priors: &Priors, j: usize, a: f64) -> f64 {
    priors.alpha_log_prior(a, state.gamma) + cell_transition_ll(&state.path, j, a, state.beta, &state.scales)
}

fn beta_target(state: &ChainState, priors: &Priors, b: f64) -> f64 {
    priors.beta_log_prior(b, state.gamma) + transition_ll(&state.path, &state.alpha, b, &state.scales)
}

fn scale_target(state: &ChainState, priors: &Priors, k: usize, v: f64) -> f64 {
    let prior = priors.scale_log_prior(v, state.r);
    match RegimeKind::of(&state.scales) {
        RegimeKind::Constant => {
            prior + transition_ll(&state.path, &state.alpha, state.beta, &ScaleRegime::Constant { c: v })
        }
        kind => {
            let ll: f64 = kind
                .times_of(k, state.horizon())
                .into_iter()
                .map(|t| step_transition_ll(&state.path, t, &state.alpha, state.beta, v))
                .sum();
            prior + ll
        }
    }
}

fn r_target(state: &ChainState, priors: &Priors, r: f64) -> f64 {
    priors.r_log_prior(r) + state.scales.values().iter().map(|&c| priors.scale_log_prior(c, Some(r))).sum::<f64>()
}

/// `Σ_t Σ_i ln Σ_j w_{j,t} K_φ(y_i, θ_j)`, with the kernel factorised over
/// grid columns and rows and a log-space fallback on underflow.
fn marginal_event_ll(state: &ChainState, data: &InferenceData, phi: f64) -> f64 {
    let grid = &data.grid;
    let atoms = grid.atoms();
    let (nx, ny) = (grid.nx(), grid.ny());
    let xs: Vec<f64> = (0..nx).map(|ix| atoms[ix][0]).collect();
    let ys: Vec<f64> = (0..ny).map(|iy| atoms[iy * nx][1]).collect();
    let inv2v = 0.5 / (phi * phi);
    let log_norm = (2.0 * std::f64::consts::PI * phi * phi).ln();
    let mut ex = vec![0.0; nx];
    let mut ey = vec![0.0; ny];
    let mut logs = vec![0.0; atoms.len()];
    let mut ll = 0.0;
    for t in 1..=data.horizon() {
        let row = state.path.row(t);
        for e in data.series.at(t) {
            for (v, x) in ex.iter_mut().zip(&xs) {
                *v = (-(e.x - x) * (e.x - x) * inv2v).exp();
            }
            for (v, y) in ey.iter_mut().zip(&ys) {
                *v = (-(e.y - y) * (e.y - y) * inv2v).exp();
            }
            let mut acc = 0.0;
            for iy in 0..ny {
                let r = &row[iy * nx..(iy + 1) * nx];
                acc += ey[iy] * r.iter().zip(&ex).map(|(w, k)| w * k).sum::<f64>();
            }
            if acc > 0.0 && acc.is_finite() {
                ll += acc.ln() - log_norm;
            } else {
                let max = allocation_log_weights(e.location(), &row.iter().map(|w| w.ln()).collect::<Vec<_>>(), atoms, inv2v, &mut logs);
                if !max.is_finite() {
                    return f64::NEG_INFINITY;
                }
                ll += max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln() - log_norm;
            }
        }
    }
    ll
}

fn phi_target(state: &ChainState, data: &InferenceData, priors: &Priors, phi: f64, target: PhiTarget) -> f64 {
    let masses = cell_kernel_masses(&data.grid, phi);
    if target == PhiTarget::Marginal {
        let kappas = state.kappas(data);
        let totals = smoothed_totals(&state.path, &masses);
        let counts = -kappas.iter().zip(&totals).map(|(k, s)| k * s).sum::<f64>();
        return priors.phi_log_prior(phi) + counts + marginal_event_ll(state, data, phi);
    }
    let (sq, n) = allocated_sq_dist(state, data);
    let log_k = -sq / (2.0 * phi * phi) - n as f64 * (2.0 * std::f64::consts::PI * phi * phi).ln();
    let obs = match target {
        PhiTarget::Exact | PhiTarget::Marginal => {
            let kappas = state.kappas(data);
            let totals = smoothed_totals(&state.path, &masses);
            log_k - kappas.iter().zip(&totals).map(|(k, s)| k * s).sum::<f64>()
        }
        PhiTarget::Truncation => {
            let denom: f64 = state.alloc.iter().flatten().map(|&z| masses[z].ln()).sum();
            log_k - denom
        }
    };
    priors.phi_log_prior(phi) + obs
}

fn eta_target(state: &ChainState, data: &InferenceData, priors: &Priors, eta: &[f64]) -> f64 {
    let masses = state.window_masses(data);
    let totals = smoothed_totals(&state.path, &masses);
    let mut ll = 0.0;
    for t in 1..=data.horizon() {
        let x = data.row(t);
        let lk: f64 = eta.iter().zip(x).map(|(a, b)| a * b).sum();
        ll += -lk.exp() * totals[t - 1] + data.series.at(t).len() as f64 * lk;
    }
    priors.eta_log_prior(eta) + ll
}

/// Log posterior restricted to the coordinates touched by the ridge move.
fn ridge_target(state: &ChainState, data: &InferenceData, priors: &Priors) -> f64 {
    let mut lp = priors.beta_log_prior(state.beta, state.gamma) + priors.eta_log_prior(&state.eta);
    lp += state.scales.values().iter().map(|&c| priors.scale_log_prior(c, state.r)).sum::<f64>();
    lp + complete_loglik(state, data)
}

fn ridge_transform(state: &ChainState, s: f64) -> ChainState {
    let mut next = state.clone();
    next.beta /= s;
    for c in next.scales.values_mut() {
        *c *= s;
    }
    next.eta[0] -= s.ln();
    next.path.scale_all(s);
    next
}

/// Current value(s) of the coordinates moved by `mv`.
pub fn current_value(mv: Move, state: &ChainState) -> Vec<f64> {
    match mv {
        Move::Alpha(j) => vec![state.alpha[j]],
        Move::Beta => vec![state.beta],
        Move::Scale(k) => vec![state.scales.values()[k]],
        Move::R => vec![state.r.expect("hierarchical regime")],
        Move::Phi => vec![state.phi],
        Move::Eta => state.eta.clone(),
        Move::Ridge => vec![1.0],
    }
}

/// Log Metropolis–Hastings ratio for moving `state` to `proposal` under `mv`.
///
/// Positive scalars use a log-scale random walk, so the ratio carries the
/// Jacobian `ln x' - ln x`; η uses a symmetric Gaussian walk; the ridge move
/// takes `proposal = [s]` and carries the Jacobian of the rescaling.
pub fn log_ratio(
    mv: Move,
    state: &ChainState,
    data: &InferenceData,
    priors: &Priors,
    phi_mode: PhiTarget,
    proposal: &[f64],
) -> f64 {
    let jac = |cur: f64, prop: f64| prop.ln() - cur.ln();
    match mv {
        Move::Alpha(j) => {
            let (c, p) = (state.alpha[j], proposal[0]);
            alpha_target(state, priors, j, p) - alpha_target(state, priors, j, c) + jac(c, p)
        }
        Move::Beta => {
            let (c, p) = (state.beta, proposal[0]);
            beta_target(state, priors, p) - beta_target(state, priors, c) + jac(c, p)
        }
        Move::Scale(k) => {
            let (c, p) = (state.scales.values()[k], proposal[0]);
            scale_target(state, priors, k, p) - scale_target(state, priors, k, c) + jac(c, p)
        }
        Move::R => {
            let (c, p) = (state.r.expect("hierarchical regime"), proposal[0]);
            r_target(state, priors, p) - r_target(state, priors, c) + jac(c, p)
        }
        Move::Phi => {
            let (c, p) = (state.phi, proposal[0]);
            phi_target(state, data, priors, p, phi_mode) - phi_target(state, data, priors, c, phi_mode) + jac(c, p)
        }
        Move::Eta => eta_target(state, data, priors, proposal) - eta_target(state, data, priors, &state.eta),
        Move::Ridge => {
            let s = proposal[0];
            let next = ridge_transform(state, s);
            let positive = state.path.as_slice().iter().filter(|&&w| w > 0.0).count();
            let dim = positive + state.scales.values().len() - 1;
            ridge_target(&next, data, priors) - ridge_target(state, data, priors) + dim as f64 * s.ln()
        }
    }
}

/// Apply an accepted proposal.
pub fn apply(mv: Move, state: &mut ChainState, proposal: &[f64]) {
    match mv {
        Move::Alpha(j) => state.alpha[j] = proposal[0],
        Move::Beta => state.beta = proposal[0],
        Move::Scale(k) => state.scales = with_scale_value(&state.scales, k, proposal[0]),
        Move::R => state.r = Some(proposal[0]),
        Move::Phi => state.phi = proposal[0],
        Move::Eta => state.eta = proposal.to_vec(),
        Move::Ridge => *state = ridge_transform(state, proposal[0]),
    }
}

/// Proposal that reverses `proposal` from the state reached by applying it.
pub fn reverse_proposal(mv: Move, state: &ChainState, proposal: &[f64]) -> Vec<f64> {
    match mv {
        Move::Ridge => vec![1.0 / proposal[0]],
        _ => current_value(mv, state),
    }
}

fn step_of(mv: Move, state: &ChainState) -> AdaptiveStep {
    let s = &state.steps;
    match mv {
        Move::Alpha(j) => s.alpha[j],
        Move::Beta => s.beta,
        Move::Scale(k) => s.scale[k],
        Move::R => s.r,
        Move::Phi => s.phi,
        Move::Eta => s.eta.step,
        Move::Ridge => s.ridge,
    }
}

fn set_step(mv: Move, state: &mut ChainState, step: AdaptiveStep) {
    let s = &mut state.steps;
    match mv {
        Move::Alpha(j) => s.alpha[j] = step,
        Move::Beta => s.beta = step,
        Move::Scale(k) => s.scale[k] = step,
        Move::R => s.r = step,
        Move::Phi => s.phi = step,
        Move::Eta => s.eta.step = step,
        Move::Ridge => s.ridge = step,
    }
}

/// One Metropolis–Hastings step for `mv`; `adapt_iteration` enables the
/// Robbins–Monro update of its proposal scale. Returns whether it accepted.
pub fn mh_update<G: Rng + ?Sized>(
    mv: Move,
    state: &mut ChainState,
    data: &InferenceData,
    priors: &Priors,
    phi_mode: PhiTarget,
    adapt_iteration: Option<u64>,
    rng: &mut G,
) -> bool {
    let mut step = step_of(mv, state);
    let proposal = match mv {
        Move::Eta => state.steps.eta.propose(&state.eta, rng),
        Move::Ridge => vec![(step.sd() * f64::std_normal_draw(rng)).exp()],
        _ => {
            let cur = current_value(mv, state)[0];
            vec![cur * (step.sd() * f64::std_normal_draw(rng)).exp()]
        }
    };
    let lr = log_ratio(mv, state, data, priors, phi_mode, &proposal);
    let accept = rng.random::<f64>().ln() < lr;
    if accept {
        apply(mv, state, &proposal);
    }
    step.record(accept, lr, adapt_iteration);
    set_step(mv, state, step);
    if mv == Move::Eta && adapt_iteration.is_some() {
        let eta = state.eta.clone();
        state.steps.eta.observe(&eta);
    }
    accept
}

// ---------------------------------------------------------------------------
// Exact updates

/// `(ā_γ, b̄_γ)` of the conjugate gamma conditional of `γ`.
pub fn gamma_posterior(state: &ChainState, priors: &Priors) -> (f64, f64) {
    let n = state.alpha.len() as f64;
    let shape = priors.a_gamma + priors.a_beta + n * priors.a_alpha;
    let rate = priors.b_gamma + state.beta * priors.b_beta + priors.b_alpha * state.alpha.iter().sum::<f64>();
    (shape, rate)
}

/// Exact draw of `γ` from its gamma full conditional.
pub fn update_gamma<G: Rng + ?Sized>(state: &mut ChainState, priors: &Priors, rng: &mut G) -> f64 {
    let (shape, rate) = gamma_posterior(state, priors);
    state.gamma = f64::gamma_draw(shape, 1.0 / rate, rng);
    state.gamma
}

/// Unnormalised log allocation weights `ln w_m - ‖y - θ_m‖² / (2φ²)` into `out`.
fn allocation_log_weights(y: [f64; 2], log_row: &[f64], atoms: &[[f64; 2]], inv2v: f64, out: &mut [f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for ((o, &lw), a) in out.iter_mut().zip(log_row).zip(atoms) {
        let dx = y[0] - a[0];
        let dy = y[1] - a[1];
        *o = lw - (dx * dx + dy * dy) * inv2v;
        max = max.max(*o);
    }
    max
}

/// Allocation probabilities `w_m K_φ(y, θ_m) / Σ_k w_k K_φ(y, θ_k)` of event `i` at `t`.
pub fn allocation_probs(state: &ChainState, data: &InferenceData, t: usize, i: usize) -> Result<Vec<f64>> {
    let y = data.series.at(t)[i].location();
    let log_row: Vec<f64> = state.path.row(t).iter().map(|w| w.ln()).collect();
    let mut p = vec![0.0; log_row.len()];
    let max = allocation_log_weights(y, &log_row, data.grid.atoms(), 0.5 / (state.phi * state.phi), &mut p);
    if !max.is_finite() {
        return Err(Error::DegenerateAllocation { t, event: i });
    }
    let mut total = 0.0;
    for v in &mut p {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}

/// Redraw every allocation from its categorical full conditional.
///
/// The Gaussian kernel factorises over the grid's columns and rows, so each
/// event needs `nx + ny` exponentials; when that product underflows the
/// event falls back to log-space weights.
pub fn sample_allocations<G: Rng + ?Sized>(state: &mut ChainState, data: &InferenceData, rng: &mut G) -> Result<()> {
    let grid = &data.grid;
    let atoms = grid.atoms();
    let (nx, ny) = (grid.nx(), grid.ny());
    let xs: Vec<f64> = (0..nx).map(|ix| atoms[ix][0]).collect();
    let ys: Vec<f64> = (0..ny).map(|iy| atoms[iy * nx][1]).collect();
    let inv2v = 0.5 / (state.phi * state.phi);
    let n = atoms.len();
    let mut cum = vec![0.0; n];
    let mut log_row = vec![0.0; n];
    let mut ex = vec![0.0; nx];
    let mut ey = vec![0.0; ny];
    for t in 1..=data.horizon() {
        let row = state.path.row(t);
        let mut have_logs = false;
        for (i, e) in data.series.at(t).iter().enumerate() {
            for (v, x) in ex.iter_mut().zip(&xs) {
                *v = (-(e.x - x) * (e.x - x) * inv2v).exp();
            }
            for (v, y) in ey.iter_mut().zip(&ys) {
                *v = (-(e.y - y) * (e.y - y) * inv2v).exp();
            }
            let mut acc = 0.0;
            for iy in 0..ny {
                for ix in 0..nx {
                    let j = iy * nx + ix;
                    acc += row[j] * ex[ix] * ey[iy];
                    cum[j] = acc;
                }
            }
            if !(acc > 0.0 && acc.is_finite()) {
                if !have_logs {
                    for (l, w) in log_row.iter_mut().zip(row) {
                        *l = w.ln();
                    }
                    have_logs = true;
                }
                let max = allocation_log_weights(e.location(), &log_row, atoms, inv2v, &mut cum);
                if !max.is_finite() {
                    return Err(Error::DegenerateAllocation { t, event: i });
                }
                acc = 0.0;
                for v in &mut cum {
                    acc += (*v - max).exp();
                    *v = acc;
                }
            }
            let u = rng.random::<f64>() * acc;
            state.alloc[t - 1][i] = cum.partition_point(|&c| c <= u).min(n - 1);
        }
    }
    Ok(())
}

/// `κ_t` for a given η (convenience for callers outside the chain).
pub fn kappa_series(eta: &[f64], data: &InferenceData) -> Vec<f64> {
    (1..=data.horizon()).map(|t| kappa_from(eta, data.row(t))).collect()
}
