//! Blocked conditional sequential Monte Carlo for the latent path.
//!
//! Each block `S` of cells is updated given every other block, the static
//! parameters and the allocations. Particles propose from the prior
//! noncentral gamma transition; the reference trajectory occupies particle 0
//! at every step and keeps its own lineage. Resampling is multinomial at
//! every step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dists::ncgamma_unchecked;
use crate::error::{Error, Result};
use crate::inference::state::{ChainState, InferenceData};
use crate::real::Real;

/// Particle count and block partition of the cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcConfig {
    pub particles: usize,
    pub blocks: Vec<Vec<usize>>,
}

/// Default target block size.
pub const DEFAULT_BLOCK_SIZE: usize = 1;

/// Contiguous row-major strips of roughly `size` cells.
pub fn default_blocks(n_cells: usize, size: usize) -> Vec<Vec<usize>> {
    let size = size.max(1);
    let l = n_cells.div_ceil(size).max(1);
    (0..l)
        .map(|b| (b * n_cells / l..(b + 1) * n_cells / l).collect())
        .filter(|v: &Vec<usize>| !v.is_empty())
        .collect()
}

impl SmcConfig {
    pub fn new(particles: usize, n_cells: usize, block_size: usize) -> Self {
        SmcConfig {
            particles,
            blocks: default_blocks(n_cells, block_size),
        }
    }

    pub fn validate(&self, n_cells: usize) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::InvalidParameter("conditional SMC needs at least 2 particles".into()));
        }
        let mut seen = vec![false; n_cells];
        for &j in self.blocks.iter().flatten() {
            if j >= n_cells || seen[j] {
                return Err(Error::InvalidParameter("blocks must be disjoint cell indices".into()));
            }
            seen[j] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter("blocks must cover every cell".into()));
        }
        Ok(())
    }
}

/// Per-step data needed by the block weights, for every cell.
struct SweepWeights {
    /// `κ_t K_φ(𝕐, θ_j)`, indexed `[t - 1][j]`.
    rate: Vec<Vec<f64>>,
    /// Allocated event counts, indexed `[t - 1][j]`.
    counts: Vec<Vec<u32>>,
}

impl SweepWeights {
    fn new(state: &ChainState, data: &InferenceData) -> Self {
        let masses = state.window_masses(data);
        SweepWeights {
            rate: state.kappas(data).iter().map(|k| masses.iter().map(|m| k * m).collect()).collect(),
            counts: state.allocation_counts(data.n_cells()),
        }
    }

    #[inline]
    fn log_weight(&self, t: usize, block: &[usize], x: &[f64]) -> f64 {
        let rate = &self.rate[t - 1];
        let counts = &self.counts[t - 1];
        let mut lw = 0.0;
        for (i, &j) in block.iter().enumerate() {
            lw -= rate[j] * x[i];
            if counts[j] > 0 {
                lw += counts[j] as f64 * x[i].ln();
            }
        }
        if lw.is_nan() {
            f64::NEG_INFINITY
        } else {
            lw
        }
    }
}

/// Normalised weights from log-weights; falls back to the reference when
/// every weight is `-∞` (cannot happen with a feasible reference).
fn normalise(log_w: &[f64], out: &mut [f64]) {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[0] = 1.0;
        return;
    }
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(log_w) {
        *o = (l - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Draw an index from normalised weights given their cumulative sums.
#[inline]
fn pick(cum: &[f64], rng: &mut (impl Rng + ?Sized)) -> usize {
    let u = rng.random::<f64>() * cum[cum.len() - 1];
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

/// Run conditional SMC on one block and return the new block trajectory,
/// row-major `T × |S|`. With `data = None` the count and allocation terms
/// are absent and the kernel targets the prior path law.
pub fn csmc_block<G: Rng + ?Sized>(
    block: &[usize],
    state: &ChainState,
    data: Option<&InferenceData>,
    particles: usize,
    rng: &mut G,
) -> Result<Vec<f64>> {
    if particles < 2 {
        return Err(Error::InvalidParameter("conditional SMC needs at least 2 particles".into()));
    }
    let weights = data.map(|d| SweepWeights::new(state, d));
    Ok(run_block(block, state, weights.as_ref(), particles, rng))
}

fn run_block<G: Rng + ?Sized>(
    block: &[usize],
    state: &ChainState,
    weights: Option<&SweepWeights>,
    particles: usize,
    rng: &mut G,
) -> Vec<f64> {
    let t_max = state.horizon();
    let b = block.len();
    let n = particles;
    let alpha: Vec<f64> = block.iter().map(|&j| state.alpha[j]).collect();

    // x[t-1][k * b + i], ancestors[t-1][k]
    let mut x = vec![vec![0.0; n * b]; t_max];
    let mut ancestors = vec![vec![0usize; n]; t_max];
    let mut log_w = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut cum = vec![0.0; n];

    let s1 = state.initial_scale();
    for (i, &j) in block.iter().enumerate() {
        x[0][i] = state.path.get(1, j);
    }
    for k in 1..n {
        for i in 0..b {
            x[0][k * b + i] = f64::gamma_draw(alpha[i], s1, rng);
        }
    }
    if let Some(bw) = weights {
        for k in 0..n {
            log_w[k] = bw.log_weight(1, block, &x[0][k * b..(k + 1) * b]);
        }
    }

    for t in 2..=t_max {
        normalise(&log_w, &mut w);
        let mut acc = 0.0;
        for (c, &v) in cum.iter_mut().zip(&w) {
            acc += v;
            *c = acc;
        }
        let c_t = state.scale_at(t);
        let (prev, cur) = x.split_at_mut(t - 1);
        let prev = &prev[t - 2];
        let cur = &mut cur[0];
        for (i, &j) in block.iter().enumerate() {
            cur[i] = state.path.get(t, j);
        }
        ancestors[t - 1][0] = 0;
        for k in 1..n {
            let a = pick(&cum, rng);
            ancestors[t - 1][k] = a;
            for i in 0..b {
                cur[k * b + i] = ncgamma_unchecked(alpha[i], state.beta * prev[a * b + i], c_t, rng);
            }
        }
        if let Some(bw) = weights {
            for k in 0..n {
                log_w[k] = bw.log_weight(t, block, &cur[k * b..(k + 1) * b]);
            }
        }
    }

    normalise(&log_w, &mut w);
    let mut acc = 0.0;
    for (c, &v) in cum.iter_mut().zip(&w) {
        acc += v;
        *c = acc;
    }
    let mut k = pick(&cum, rng);
    let mut out = vec![0.0; t_max * b];
    for t in (1..=t_max).rev() {
        out[(t - 1) * b..t * b].copy_from_slice(&x[t - 1][k * b..(k + 1) * b]);
        k = ancestors[t - 1][k];
    }
    out
}

/// Write a block trajectory returned by [`csmc_block`] into the state.
pub fn apply_block(block: &[usize], traj: &[f64], state: &mut ChainState) {
    let b = block.len();
    for t in 1..=state.horizon() {
        for (i, &j) in block.iter().enumerate() {
            state.path.set(t, j, traj[(t - 1) * b + i]);
        }
    }
}

/// One sweep of conditional SMC over every block in order.
pub fn csmc_sweep<G: Rng + ?Sized>(
    state: &mut ChainState,
    data: Option<&InferenceData>,
    config: &SmcConfig,
    rng: &mut G,
) -> Result<()> {
    config.validate(state.alpha.len())?;
    // Rates and counts do not depend on the path, so one table serves every block.
    let weights = data.map(|d| SweepWeights::new(state, d));
    for block in &config.blocks {
        let traj = run_block(block, state, weights.as_ref(), config.particles, rng);
        apply_block(block, &traj, state);
    }
    Ok(())
}
