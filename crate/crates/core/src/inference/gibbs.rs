//! Particle Gibbs sweep, chain driver and posterior predictive forecasts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dists::ncgamma_unchecked;
use crate::error::{Error, Result};
use crate::inference::conditionals::{complete_loglik, mh_update, sample_allocations, update_gamma, Move, PhiTarget};
use crate::inference::csmc::{csmc_sweep, SmcConfig};
use crate::inference::priors::{Priors, ScalePrior};
use crate::inference::state::{kappa_from, ChainState, InferenceData};
use crate::marg::{lag_recursion, LatentPath, ScaleRegime};
use crate::obs::{cell_kernel_masses, simulate_points_with, Event, PointSeries};
use crate::real::Real;
use crate::stats;

/// Which blocks of the sweep run; everything is on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateFlags {
    pub alpha: bool,
    pub beta: bool,
    pub scale: bool,
    pub r: bool,
    pub gamma: bool,
    pub phi: bool,
    pub eta: bool,
    pub ridge: bool,
    pub allocations: bool,
    pub latent: bool,
}

impl Default for UpdateFlags {
    fn default() -> Self {
        UpdateFlags {
            alpha: true,
            beta: true,
            scale: true,
            r: true,
            gamma: true,
            phi: true,
            eta: true,
            ridge: true,
            allocations: true,
            latent: true,
        }
    }
}

impl UpdateFlags {
    /// Only the latent path moves.
    pub fn latent_only() -> Self {
        UpdateFlags {
            alpha: false,
            beta: false,
            scale: false,
            r: false,
            gamma: false,
            phi: false,
            eta: false,
            ridge: false,
            allocations: false,
            latent: true,
        }
    }
}

/// Sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub adapt: bool,
    pub smc: SmcConfig,
    pub phi_target: PhiTarget,
    pub updates: UpdateFlags,
    /// Keep the whole latent path in each retained draw.
    pub store_paths: bool,
}

impl ChainConfig {
    /// Defaults: 10⁴ burn-in, thinning 10, adaptation on, 16 particles,
    /// single-cell blocks.
    pub fn new(iterations: usize, n_cells: usize) -> Self {
        ChainConfig {
            iterations,
            burn_in: 10_000,
            thin: 10,
            adapt: true,
            smc: SmcConfig::new(16, n_cells, crate::inference::csmc::DEFAULT_BLOCK_SIZE),
            phi_target: PhiTarget::Exact,
            updates: UpdateFlags::default(),
            store_paths: false,
        }
    }

    pub fn validate(&self, n_cells: usize) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be >= 1".into()));
        }
        if self.burn_in > self.iterations {
            return Err(Error::InvalidParameter("burn-in exceeds the chain length".into()));
        }
        self.smc.validate(n_cells)
    }
}

/// One particle-Gibbs sweep: (1) static parameters, with the bandwidth last,
/// (2) allocations, (3) conditional SMC over every block. `iteration` is 1-based; proposal
/// scales adapt while `adapt` is set.
pub fn particle_gibbs_step<G: Rng + ?Sized>(
    state: &mut ChainState,
    data: &InferenceData,
    priors: &Priors,
    config: &ChainConfig,
    iteration: u64,
    adapt: bool,
    rng: &mut G,
) -> Result<()> {
    let u = &config.updates;
    let ad = adapt.then_some(iteration);
    let pt = config.phi_target;
    if u.alpha {
        for j in 0..state.alpha.len() {
            mh_update(Move::Alpha(j), state, data, priors, pt, ad, rng);
        }
    }
    if u.beta {
        mh_update(Move::Beta, state, data, priors, pt, ad, rng);
    }
    if u.scale {
        for k in 0..state.scales.values().len() {
            mh_update(Move::Scale(k), state, data, priors, pt, ad, rng);
        }
    }
    if u.r && state.r.is_some() {
        mh_update(Move::R, state, data, priors, pt, ad, rng);
    }
    if u.gamma {
        update_gamma(state, priors, rng);
    }
    if u.eta && !state.eta.is_empty() {
        mh_update(Move::Eta, state, data, priors, pt, ad, rng);
    }
    if u.ridge && data.has_intercept() && !state.eta.is_empty() {
        mh_update(Move::Ridge, state, data, priors, pt, ad, rng);
    }
    if u.phi {
        mh_update(Move::Phi, state, data, priors, pt, ad, rng);
    }
    if u.allocations {
        sample_allocations(state, data, rng)?;
    }
    if u.latent {
        csmc_sweep(state, Some(data), &config.smc, rng)?;
    }
    Ok(())
}

/// Static parameters of one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawParams {
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub scales: ScaleRegime<f64>,
    pub gamma: f64,
    pub phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub eta: Vec<f64>,
}

/// A retained posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    /// Index of the chain that produced the draw.
    #[serde(default)]
    pub chain: usize,
    pub iteration: usize,
    #[serde(rename = "parameters")]
    pub params: DrawParams,
    pub loglik: f64,
    /// `Σ_j w_{j,t}` for each `t`.
    pub latent_totals: Vec<f64>,
    /// `Λ_t(𝕐)` for each `t`.
    pub fitted_totals: Vec<f64>,
    /// `w_{·,T}`, the forecast origin.
    pub last_weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<LatentPath<f64>>,
}

impl Draw {
    pub fn from_state(iteration: usize, state: &ChainState, data: &InferenceData, store_path: bool) -> Self {
        let masses = state.window_masses(data);
        let kappas = state.kappas(data);
        let t_max = state.horizon();
        Draw {
            chain: 0,
            iteration,
            params: DrawParams {
                alpha: state.alpha.clone(),
                beta: state.beta,
                scales: state.scales.clone(),
                gamma: state.gamma,
                phi: state.phi,
                r: state.r,
                eta: state.eta.clone(),
            },
            loglik: complete_loglik(state, data),
            latent_totals: state.path.rows().map(|r| r.iter().sum()).collect(),
            fitted_totals: state
                .path
                .rows()
                .zip(&kappas)
                .map(|(r, k)| k * r.iter().zip(&masses).map(|(w, m)| w * m).sum::<f64>())
                .collect(),
            last_weights: state.path.row(t_max).to_vec(),
            path: store_path.then(|| state.path.clone()),
        }
    }

    /// Flattened `(name, value)` pairs of the static parameters.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        self.params.named_values()
    }
}

impl DrawParams {
    /// Flattened `(name, value)` pairs.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (j, a) in self.alpha.iter().enumerate() {
            out.push((format!("alpha[{}]", j + 1), *a));
        }
        out.push(("beta".into(), self.beta));
        match &self.scales {
            ScaleRegime::Constant { c } => {
                out.push(("c".into(), *c));
                out.push(("rho".into(), self.beta * c));
            }
            ScaleRegime::TimeVarying { c } => {
                for (t, v) in c.iter().enumerate() {
                    out.push((format!("c[{}]", t + 1), *v));
                }
            }
            ScaleRegime::Monthly { xi, .. } => {
                for (k, v) in xi.iter().enumerate() {
                    out.push((format!("xi[{}]", k + 1), *v));
                }
            }
        }
        out.push(("gamma".into(), self.gamma));
        out.push(("phi".into(), self.phi));
        if let Some(r) = self.r {
            out.push(("r".into(), r));
        }
        for (k, v) in self.eta.iter().enumerate() {
            out.push((format!("eta[{k}]"), *v));
        }
        out
    }
}

/// Output of [`run_chain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub draws: Vec<Draw>,
    pub acceptance: Vec<(String, f64)>,
    pub final_state: ChainState,
}

/// Run `config.iterations` sweeps from `init`, adapting during burn-in and
/// keeping every `thin`-th post-burn-in state. `on_draw` sees each retained
/// draw as it is produced.
pub fn run_chain<G: Rng + ?Sized>(
    data: &InferenceData,
    priors: &Priors,
    config: &ChainConfig,
    init: ChainState,
    rng: &mut G,
    mut on_draw: impl FnMut(&Draw) -> Result<()>,
) -> Result<ChainOutput> {
    priors.validate()?;
    config.validate(data.n_cells())?;
    init.validate(data)?;
    let mut state = init;
    let mut draws = Vec::new();
    for it in 1..=config.iterations {
        let in_burn = it <= config.burn_in;
        particle_gibbs_step(&mut state, data, priors, config, it as u64, config.adapt && in_burn, rng)?;
        if it == config.burn_in {
            reset_counters(&mut state);
        }
        if !in_burn && (it - config.burn_in) % config.thin == 0 {
            let d = Draw::from_state(it, &state, data, config.store_paths);
            on_draw(&d)?;
            draws.push(d);
        }
    }
    Ok(ChainOutput {
        draws,
        acceptance: state.steps.acceptance_rates(),
        final_state: state,
    })
}

fn reset_counters(state: &mut ChainState) {
    let s = &mut state.steps;
    s.alpha.iter_mut().for_each(|a| a.reset_counts());
    s.scale.iter_mut().for_each(|a| a.reset_counts());
    for a in [&mut s.beta, &mut s.r, &mut s.phi, &mut s.eta.step, &mut s.ridge] {
        a.reset_counts();
    }
}

/// Draw a latent path from the M-ARG(1) prior at the state's parameters,
/// starting from the same initial law the likelihood uses.
pub fn simulate_latent_path<G: Rng + ?Sized>(state: &ChainState, rng: &mut G) -> LatentPath<f64> {
    let t_max = state.horizon();
    let n = state.alpha.len();
    let mut path = LatentPath::zeros(t_max, n);
    let s1 = state.initial_scale();
    for j in 0..n {
        path.set(1, j, f64::gamma_draw(state.alpha[j], s1, rng));
    }
    for t in 2..=t_max {
        let c = state.scale_at(t);
        for j in 0..n {
            let prev = path.get(t - 1, j);
            path.set(t, j, ncgamma_unchecked(state.alpha[j], state.beta * prev, c, rng));
        }
    }
    path
}

/// Simulate fresh observations `(y, z)` given the state's latent path.
pub fn simulate_observations<G: Rng + ?Sized>(
    state: &ChainState,
    data: &InferenceData,
    rng: &mut G,
) -> Result<PointSeries<f64>> {
    let masses = cell_kernel_masses(&data.grid, state.phi);
    let kappas = state.kappas(data);
    let mut steps: Vec<Vec<Event<f64>>> = Vec::with_capacity(data.horizon());
    for t in 1..=data.horizon() {
        steps.push(simulate_points_with(state.path.row(t), kappas[t - 1], &data.grid, state.phi, &masses, rng)?);
    }
    Ok(PointSeries::from_steps(steps))
}

/// Predictive summaries for one forecast step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastStep {
    pub h: usize,
    pub count_mean: f64,
    pub count_q025: f64,
    pub count_q50: f64,
    pub count_q975: f64,
    /// Mean of `Λ_{T+h}(𝕐)` over draws.
    pub intensity_mean: f64,
    /// Simulated mean of `Σ_j w_{j,T+h}` and its Monte Carlo standard error.
    pub latent_total_mean: f64,
    pub latent_total_se: f64,
    /// Draw average of `Σ_j E(w_{j,T+h} | w_T)`.
    pub latent_total_expected: f64,
    pub observed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub steps: Vec<ForecastStep>,
    pub mse: Option<f64>,
    pub mae: Option<f64>,
}

/// `c_{T+s}`: known for constant and monthly regimes; for a time-varying
/// regime drawn from the hierarchical prior `Ga(r²/σ², r/σ²)`.
fn future_scale<G: Rng + ?Sized>(draw: &Draw, priors: &Priors, t: usize, rng: &mut G) -> Result<f64> {
    match (&draw.params.scales, &priors.scale) {
        (ScaleRegime::TimeVarying { c }, ScalePrior::Hierarchical { sigma2_c, .. }) => {
            if t <= c.len() {
                return Ok(c[t - 1]);
            }
            let r = draw.params.r.ok_or(Error::UnsupportedRegime)?;
            Ok(f64::gamma_draw(r * r / sigma2_c, sigma2_c / r, rng))
        }
        (ScaleRegime::TimeVarying { .. }, _) => Err(Error::UnsupportedRegime),
        (s, _) => s.at(t),
    }
}

/// Posterior predictive forecast of the next `h` steps from every draw.
/// `held_out` gives observed counts for `T+1..` when available.
pub fn forecast<G: Rng + ?Sized>(
    draws: &[Draw],
    data: &InferenceData,
    priors: &Priors,
    h: usize,
    held_out: Option<&[usize]>,
    rng: &mut G,
) -> Result<Forecast> {
    if draws.is_empty() {
        return Err(Error::NoDraws);
    }
    if h == 0 {
        return Ok(Forecast { steps: Vec::new(), mse: None, mae: None });
    }
    let t0 = data.horizon();
    let n_draws = draws.len();
    let mut counts = vec![vec![0.0; n_draws]; h];
    let mut intensities = vec![vec![0.0; n_draws]; h];
    let mut latent = vec![vec![0.0; n_draws]; h];
    let mut expected = vec![vec![0.0; n_draws]; h];
    for (d, draw) in draws.iter().enumerate() {
        let masses = cell_kernel_masses(&data.grid, draw.params.phi);
        let mut w = draw.last_weights.clone();
        let mut scales = Vec::with_capacity(h);
        for s in 1..=h {
            let t = t0 + s;
            let c = future_scale(draw, priors, t, rng)?;
            scales.push(c);
            for (j, wj) in w.iter_mut().enumerate() {
                *wj = ncgamma_unchecked(draw.params.alpha[j], draw.params.beta * *wj, c, rng);
            }
            let x = data.design.row(t)?;
            let kappa = kappa_from(&draw.params.eta, &x);
            let lam = kappa * w.iter().zip(&masses).map(|(a, b)| a * b).sum::<f64>();
            let n = if lam > 0.0 { f64::poisson_draw(lam, rng) } else { 0 };
            counts[s - 1][d] = n as f64;
            intensities[s - 1][d] = lam;
            latent[s - 1][d] = w.iter().sum();
            // E(w_{T+s} | w_T) = c_{T+s|T} α + ρ_{T+s|T} w_T, with the drawn scales.
            let path = ScaleRegime::TimeVarying {
                c: std::iter::repeat(1.0).take(t0).chain(scales.iter().copied()).collect(),
            };
            let lag = lag_recursion(draw.params.beta, &path, t0, s);
            expected[s - 1][d] = draw
                .params
                .alpha
                .iter()
                .zip(&draw.last_weights)
                .map(|(a, w0)| lag.scale * a + lag.rho * w0)
                .sum();
        }
    }
    let mut steps = Vec::with_capacity(h);
    for s in 0..h {
        let mut sorted = counts[s].clone();
        sorted.sort_by(f64::total_cmp);
        let (lm, lse) = stats::mean_se(&latent[s]);
        steps.push(ForecastStep {
            h: s + 1,
            count_mean: stats::mean_var(&counts[s]).0,
            count_q025: stats::quantile_sorted(&sorted, 0.025),
            count_q50: stats::quantile_sorted(&sorted, 0.5),
            count_q975: stats::quantile_sorted(&sorted, 0.975),
            intensity_mean: stats::mean_var(&intensities[s]).0,
            latent_total_mean: lm,
            latent_total_se: lse,
            latent_total_expected: stats::mean_var(&expected[s]).0,
            observed: held_out.and_then(|o| o.get(s).copied()),
        });
    }
    let (mse, mae) = match held_out {
        Some(obs) if !obs.is_empty() => {
            let k = obs.len().min(h);
            let o: Vec<f64> = obs[..k].iter().map(|&v| v as f64).collect();
            let f: Vec<f64> = steps[..k].iter().map(|s| s.intensity_mean).collect();
            let (a, b) = crate::analytics::fit_diagnostics(&o, &f)?;
            (Some(a), Some(b))
        }
        _ => (None, None),
    };
    Ok(Forecast { steps, mse, mae })
}
