//! Observed data bundle and the particle-Gibbs chain state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::inference::adapt::{AdaptiveStep, EtaProposal, SCALAR_TARGET};
use crate::inference::priors::{Priors, ScalePrior};
use crate::marg::{month_of, LatentPath, ScaleRegime};
use crate::obs::{cell_kernel_masses, CovariateDesign, PointSeries};
use crate::real::Real;

/// Observed point series together with the fixed model structure.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceData {
    pub grid: Grid<f64>,
    pub series: PointSeries<f64>,
    pub design: CovariateDesign<f64>,
    rows: Vec<Vec<f64>>,
    log_factorials: Vec<f64>,
}

impl InferenceData {
    pub fn new(grid: Grid<f64>, series: PointSeries<f64>, design: CovariateDesign<f64>) -> Result<Self> {
        let horizon = series.horizon();
        if horizon == 0 {
            return Err(Error::InvalidArgument("data needs at least one time step".into()));
        }
        series.validate(grid.window(), grid.len())?;
        design.validate()?;
        let rows = (1..=horizon).map(|t| design.row(t)).collect::<Result<Vec<_>>>()?;
        let log_factorials = series.counts().iter().map(|&n| (n as f64 + 1.0).lgamma()).collect();
        Ok(InferenceData {
            grid,
            series,
            design,
            rows,
            log_factorials,
        })
    }

    /// Same structure, new observations.
    pub fn with_series(&self, series: PointSeries<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), series, self.design.clone())
    }

    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cells(&self) -> usize {
        self.grid.len()
    }

    /// Design row `x_t`.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t - 1]
    }

    pub fn log_factorial(&self, t: usize) -> f64 {
        self.log_factorials[t - 1]
    }

    pub fn eta_dim(&self) -> usize {
        self.design.dim()
    }

    /// Whether the first covariate is an intercept (needed by the scale-ridge move).
    pub fn has_intercept(&self) -> bool {
        !matches!(self.design, CovariateDesign::Custom { .. })
    }
}

/// Adaptive proposal bookkeeping, one entry per updated parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSteps {
    pub alpha: Vec<AdaptiveStep>,
    pub beta: AdaptiveStep,
    pub scale: Vec<AdaptiveStep>,
    pub r: AdaptiveStep,
    pub phi: AdaptiveStep,
    pub eta: EtaProposal,
    pub ridge: AdaptiveStep,
}

impl ProposalSteps {
    pub fn new(n_cells: usize, n_scales: usize, eta_dim: usize) -> Self {
        let s = |sd: f64| AdaptiveStep::new(sd.ln(), SCALAR_TARGET);
        ProposalSteps {
            alpha: vec![s(0.3); n_cells],
            beta: s(0.1),
            scale: vec![s(0.1); n_scales],
            r: s(0.2),
            phi: s(0.05),
            eta: EtaProposal::new(eta_dim, 0.05),
            ridge: s(0.1),
        }
    }

    /// `(name, acceptance rate)` for every tracked proposal.
    pub fn acceptance_rates(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (j, a) in self.alpha.iter().enumerate() {
            out.push((format!("alpha[{}]", j + 1), a.rate()));
        }
        out.push(("beta".into(), self.beta.rate()));
        for (k, a) in self.scale.iter().enumerate() {
            out.push((format!("scale[{}]", k + 1), a.rate()));
        }
        out.push(("r".into(), self.r.rate()));
        out.push(("phi".into(), self.phi.rate()));
        out.push(("eta".into(), self.eta.step.rate()));
        out.push(("ridge".into(), self.ridge.rate()));
        out
    }
}

/// One particle-Gibbs state `(α, β, c, γ, φ, r, η, W, Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub scales: ScaleRegime<f64>,
    pub gamma: f64,
    pub phi: f64,
    /// Hyper-scale of hierarchical scale priors; `None` for a constant scale.
    pub r: Option<f64>,
    pub eta: Vec<f64>,
    pub path: LatentPath<f64>,
    /// Allocation (0-based cell) of every event, indexed `[t - 1][i]`.
    pub alloc: Vec<Vec<usize>>,
    pub steps: ProposalSteps,
}

/// Gamma scale of the latent initial law: stationary when the regime is
/// constant with `ρ < 1`, innovation-only `Gamma(α, scale c₁)` otherwise.
#[inline]
pub fn initial_scale(beta: f64, scales: &ScaleRegime<f64>) -> f64 {
    match scales {
        ScaleRegime::Constant { c } if beta * c < 1.0 => c / (1.0 - beta * c),
        _ => scales.at_unchecked(1),
    }
}

impl ChainState {
    pub fn validate(&self, data: &InferenceData) -> Result<()> {
        let n = data.n_cells();
        let t_max = data.horizon();
        if self.alpha.len() != n || self.alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter("alpha must have one positive entry per cell".into()));
        }
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma), ("phi", self.phi)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        self.scales.validate()?;
        if let ScaleRegime::TimeVarying { c } = &self.scales {
            if c.len() != t_max {
                return Err(Error::InvalidParameter("time-varying scales must have T entries".into()));
            }
        }
        if self.eta.len() != data.eta_dim() {
            return Err(Error::InvalidParameter("eta does not match the design".into()));
        }
        if self.path.horizon() != t_max || self.path.n_cells() != n {
            return Err(Error::InvalidParameter("latent path does not match grid and T".into()));
        }
        if self.alloc.len() != t_max {
            return Err(Error::InvalidParameter("allocations must cover every time step".into()));
        }
        for t in 1..=t_max {
            if self.alloc[t - 1].len() != data.series.at(t).len() || self.alloc[t - 1].iter().any(|&z| z >= n) {
                return Err(Error::InvalidParameter(format!("bad allocations at t = {t}")));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.path.horizon()
    }

    #[inline]
    pub fn scale_at(&self, t: usize) -> f64 {
        self.scales.at_unchecked(t)
    }

    pub fn initial_scale(&self) -> f64 {
        initial_scale(self.beta, &self.scales)
    }

    /// `κ_t` for `t = 1..=T`.
    pub fn kappas(&self, data: &InferenceData) -> Vec<f64> {
        (1..=data.horizon()).map(|t| kappa_from(&self.eta, data.row(t))).collect()
    }

    /// `K_φ(𝕐, θ_j)` at the current bandwidth.
    pub fn window_masses(&self, data: &InferenceData) -> Vec<f64> {
        cell_kernel_masses(&data.grid, self.phi)
    }

    /// `ρ = βc` for a constant regime.
    pub fn rho(&self) -> Option<f64> {
        self.scales.constant().map(|c| self.beta * c)
    }

    /// Allocated-event counts `n_{t,j}`, indexed `[t - 1][j]`.
    pub fn allocation_counts(&self, n_cells: usize) -> Vec<Vec<u32>> {
        self.alloc
            .iter()
            .map(|zs| {
                let mut n = vec![0u32; n_cells];
                for &z in zs {
                    n[z] += 1;
                }
                n
            })
            .collect()
    }

    /// Copy the allocations into the series' `z` fields.
    pub fn allocated_series(&self, data: &InferenceData) -> PointSeries<f64> {
        let mut s = data.series.clone();
        for t in 1..=s.horizon() {
            for (e, &z) in s.at_mut(t).iter_mut().zip(&self.alloc[t - 1]) {
                e.z = Some(z);
            }
        }
        s
    }

    /// Data-driven starting point.
    ///
    /// The scale regime keeps its kind and the values in `scales`; α, β, φ
    /// and γ start from simple moment heuristics, η from the mean count, the
    /// allocations from the containing cell and the latent path from the
    /// per-cell gamma–Poisson posterior mean.
    pub fn initialize(data: &InferenceData, priors: &Priors, scales: ScaleRegime<f64>) -> Result<Self> {
        let n = data.n_cells();
        let t_max = data.horizon();
        let alpha = vec![1.0; n];
        let c_mean = scales.values().iter().sum::<f64>() / scales.values().len() as f64;
        let beta = 0.5 / c_mean;
        let phi = (data.grid.window().width() / data.grid.nx() as f64)
            .min(data.grid.window().height() / data.grid.ny() as f64);
        let gamma = priors.a_gamma / priors.b_gamma;
        let r = priors.is_hierarchical().then_some(c_mean);

        let masses = cell_kernel_masses(&data.grid, phi);
        let s1 = initial_scale(beta, &scales);
        let expected: f64 = alpha.iter().zip(&masses).map(|(a, m)| a * s1 * m).sum();
        let mean_count = data.series.total() as f64 / t_max as f64;
        let mut eta = vec![0.0; data.eta_dim()];
        if data.has_intercept() && !eta.is_empty() {
            let mean_x: Vec<f64> = (0..eta.len())
                .map(|k| (1..=t_max).map(|t| data.row(t)[k]).sum::<f64>() / t_max as f64)
                .collect();
            eta[0] = ((mean_count + 0.5) / expected).ln() / mean_x[0];
        }

        let alloc: Vec<Vec<usize>> = (1..=t_max)
            .map(|t| {
                data.series
                    .at(t)
                    .iter()
                    .map(|e| e.z.unwrap_or_else(|| data.grid.locate(e.x, e.y).expect("validated location")))
                    .collect()
            })
            .collect();

        let mut state = ChainState {
            alpha,
            beta,
            scales,
            gamma,
            phi,
            r,
            eta,
            path: LatentPath::zeros(t_max, n),
            alloc,
            steps: ProposalSteps::new(n, 0, data.eta_dim()),
        };
        state.steps = ProposalSteps::new(n, state.scales.values().len(), data.eta_dim());
        let kappas = state.kappas(data);
        let counts = state.allocation_counts(n);
        let mut path = LatentPath::zeros(t_max, n);
        for t in 1..=t_max {
            let s = if t == 1 { s1 } else { state.scale_at(t) / (1.0 - (beta * state.scale_at(t)).min(0.9)) };
            for j in 0..n {
                let w = (state.alpha[j] + counts[t - 1][j] as f64) / (1.0 / s + kappas[t - 1] * masses[j]);
                path.set(t, j, w);
            }
        }
        state.path = path;
        state.validate(data)?;
        Ok(state)
    }

    /// Assemble a state from prior draws, a path and allocations.
    pub fn from_parts(params: PriorDraw, path: LatentPath<f64>, alloc: Vec<Vec<usize>>) -> Self {
        let steps = ProposalSteps::new(params.alpha.len(), params.scales.values().len(), params.eta.len());
        ChainState {
            alpha: params.alpha,
            beta: params.beta,
            scales: params.scales,
            gamma: params.gamma,
            phi: params.phi,
            r: params.r,
            eta: params.eta,
            path,
            alloc,
            steps,
        }
    }
}

/// `exp(η · x)`.
#[inline]
pub fn kappa_from(eta: &[f64], x: &[f64]) -> f64 {
    eta.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().exp()
}

/// Parameters drawn from the prior, used to build generative test cases.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDraw {
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub scales: ScaleRegime<f64>,
    pub gamma: f64,
    pub phi: f64,
    pub r: Option<f64>,
    pub eta: Vec<f64>,
}

/// Scale-regime shape used when drawing from the prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegimeKind {
    Constant,
    TimeVarying,
    Monthly { start_month: u32 },
}

impl RegimeKind {
    pub fn of(scales: &ScaleRegime<f64>) -> Self {
        match scales {
            ScaleRegime::Constant { .. } => RegimeKind::Constant,
            ScaleRegime::TimeVarying { .. } => RegimeKind::TimeVarying,
            ScaleRegime::Monthly { start_month, .. } => RegimeKind::Monthly { start_month: *start_month },
        }
    }

    /// Indices `t ∈ 1..=T` governed by free scale value `k` (0-based).
    pub fn times_of(&self, k: usize, horizon: usize) -> Vec<usize> {
        match self {
            RegimeKind::Constant => (1..=horizon).collect(),
            RegimeKind::TimeVarying => vec![k + 1],
            RegimeKind::Monthly { start_month } => {
                (1..=horizon).filter(|&t| month_of(t, *start_month) == k + 1).collect()
            }
        }
    }
}

pub fn draw_from_prior<G: Rng + ?Sized>(
    priors: &Priors,
    n_cells: usize,
    horizon: usize,
    kind: RegimeKind,
    rng: &mut G,
) -> Result<PriorDraw> {
    priors.validate()?;
    let gamma = f64::gamma_draw(priors.a_gamma, 1.0 / priors.b_gamma, rng);
    let alpha = (0..n_cells)
        .map(|_| f64::gamma_draw(priors.a_alpha, 1.0 / (gamma * priors.b_alpha), rng))
        .collect();
    let beta = f64::gamma_draw(priors.a_beta, 1.0 / (gamma * priors.b_beta), rng);
    let phi = f64::gamma_draw(priors.a_phi, 1.0 / priors.b_phi, rng);
    let (scales, r) = match (kind, &priors.scale) {
        (RegimeKind::Constant, ScalePrior::Constant { a_c, b_c }) => {
            (ScaleRegime::Constant { c: f64::gamma_draw(*a_c, 1.0 / b_c, rng) }, None)
        }
        (RegimeKind::Constant, _) | (_, ScalePrior::Constant { .. }) => {
            return Err(Error::InvalidParameter("scale prior does not match the regime".into()))
        }
        (kind, ScalePrior::Hierarchical { sigma2_c, a_r, b_r }) => {
            let r = f64::gamma_draw(*a_r, 1.0 / b_r, rng);
            let mut draw = || f64::gamma_draw(r * r / sigma2_c, sigma2_c / r, rng);
            let regime = match kind {
                RegimeKind::TimeVarying => ScaleRegime::TimeVarying { c: (0..horizon).map(|_| draw()).collect() },
                RegimeKind::Monthly { start_month } => {
                    let mut xi = [0.0; 12];
                    for v in &mut xi {
                        *v = draw();
                    }
                    ScaleRegime::Monthly { xi, start_month }
                }
                RegimeKind::Constant => unreachable!(),
            };
            (regime, Some(r))
        }
    };
    let l = crate::inference::priors::cholesky(&priors.eta_cov)?;
    let z: Vec<f64> = (0..priors.eta_mean.len()).map(|_| f64::std_normal_draw(rng)).collect();
    let eta = crate::inference::priors::lower_mul(&l, &z)
        .iter()
        .zip(&priors.eta_mean)
        .map(|(a, b)| a + b)
        .collect();
    Ok(PriorDraw {
        alpha,
        beta,
        scales,
        gamma,
        phi,
        r,
        eta,
    })
}
