//! Robbins–Monro adaptation of random-walk proposal scales.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::inference::priors::{cholesky, identity, lower_mul};
use crate::real::Real;

/// Target acceptance rate of scalar updates.
pub const SCALAR_TARGET: f64 = 0.44;
/// Target acceptance rate of the η block.
pub const BLOCK_TARGET: f64 = 0.234;

/// `log_step + iteration^{-0.6} (accept_prob - target)`.
pub fn adapt_step(accept_prob: f64, log_step: f64, iteration: u64, target: f64) -> f64 {
    let gain = (iteration.max(1) as f64).powf(-0.6);
    log_step + gain * (accept_prob - target)
}

/// Proposal scale (log standard deviation) with acceptance counters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveStep {
    pub log_step: f64,
    pub target: f64,
    pub accepted: u64,
    pub proposed: u64,
}

impl AdaptiveStep {
    pub fn new(log_step: f64, target: f64) -> Self {
        AdaptiveStep {
            log_step,
            target,
            accepted: 0,
            proposed: 0,
        }
    }

    #[inline]
    pub fn sd(&self) -> f64 {
        self.log_step.exp()
    }

    /// Record an MH decision with log acceptance ratio `log_ratio`; adapt when
    /// `iteration` is given.
    pub fn record(&mut self, accepted: bool, log_ratio: f64, iteration: Option<u64>) {
        self.proposed += 1;
        self.accepted += accepted as u64;
        if let Some(i) = iteration {
            let p = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
            self.log_step = adapt_step(p, self.log_step, i, self.target);
        }
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn reset_counts(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }
}

/// Gaussian random walk for η: `η' = η + e^{log_step} L ε` where `L L'` is
/// the proposal covariance, re-estimated from the chain during burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaProposal {
    pub step: AdaptiveStep,
    pub chol: Vec<Vec<f64>>,
    n: u64,
    mean: Vec<f64>,
    m2: Vec<Vec<f64>>,
}

/// Samples collected before the empirical covariance replaces the initial one.
const COV_WARMUP: u64 = 200;

impl EtaProposal {
    pub fn new(dim: usize, sd: f64) -> Self {
        EtaProposal {
            step: AdaptiveStep::new(0.0, BLOCK_TARGET),
            chol: identity(dim, sd),
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![vec![0.0; dim]; dim],
        }
    }

    pub fn propose<G: Rng + ?Sized>(&self, eta: &[f64], rng: &mut G) -> Vec<f64> {
        let z: Vec<f64> = eta.iter().map(|_| f64::std_normal_draw(rng)).collect();
        let s = self.step.sd();
        eta.iter().zip(lower_mul(&self.chol, &z)).map(|(a, d)| a + s * d).collect()
    }

    /// Fold the current η into the running covariance and refresh the factor
    /// every 50 samples once warmed up.
    pub fn observe(&mut self, eta: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        let d: Vec<f64> = eta.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for (m, di) in self.mean.iter_mut().zip(&d) {
            *m += di / n;
        }
        for i in 0..d.len() {
            for j in 0..d.len() {
                self.m2[i][j] += d[i] * (eta[j] - self.mean[j]);
            }
        }
        if self.n >= COV_WARMUP && self.n % 50 == 0 {
            let dim = d.len();
            let scale = 2.38 * 2.38 / dim.max(1) as f64;
            let cov: Vec<Vec<f64>> = (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| {
                            let v = scale * self.m2[i][j] / (n - 1.0);
                            if i == j {
                                v + 1e-8
                            } else {
                                v
                            }
                        })
                        .collect()
                })
                .collect();
            if let Ok(l) = cholesky(&cov) {
                self.chol = l;
                if self.n == COV_WARMUP {
                    // The empirical factor already carries the 2.38²/m scaling.
                    self.step.log_step = 0.0;
                }
            }
        }
    }
}
