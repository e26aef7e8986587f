//! Prior hyperparameters of the static parameters.

use serde::{Deserialize, Serialize};

use crate::dists::gamma_logpdf;
use crate::error::{Error, Result};

/// Prior on the scale sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalePrior {
    /// `c ~ Ga(a_c, b_c)`.
    Constant { a_c: f64, b_c: f64 },
    /// `c_t | r ~ Ga(r²/σ², r/σ²)`, `r ~ Ga(a_r, b_r)`; used for time-varying
    /// and monthly regimes.
    Hierarchical { sigma2_c: f64, a_r: f64, b_r: f64 },
}

/// Gamma priors are shape/rate. `α_j | γ ~ Ga(a_α, γ b_α)`, `β | γ ~ Ga(a_β, γ b_β)`,
/// `γ ~ Ga(a_γ, b_γ)`, `φ ~ Ga(a_φ, b_φ)`, `η ~ N(μ_η, Σ_η)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub a_alpha: f64,
    pub b_alpha: f64,
    pub a_beta: f64,
    pub b_beta: f64,
    pub a_gamma: f64,
    pub b_gamma: f64,
    pub a_phi: f64,
    pub b_phi: f64,
    pub scale: ScalePrior,
    pub eta_mean: Vec<f64>,
    pub eta_cov: Vec<Vec<f64>>,
}

impl Priors {
    /// Weakly informative defaults for an `m`-dimensional η.
    pub fn default_for(m: usize, hierarchical: bool) -> Self {
        let scale = if hierarchical {
            ScalePrior::Hierarchical { sigma2_c: 1.0, a_r: 2.0, b_r: 2.0 }
        } else {
            ScalePrior::Constant { a_c: 2.0, b_c: 2.0 }
        };
        Priors {
            a_alpha: 2.0,
            b_alpha: 2.0,
            a_beta: 2.0,
            b_beta: 1.0,
            a_gamma: 2.0,
            b_gamma: 2.0,
            a_phi: 2.0,
            b_phi: 4.0,
            scale,
            eta_mean: vec![0.0; m],
            eta_cov: identity(m, 10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.a_alpha,
            self.b_alpha,
            self.a_beta,
            self.b_beta,
            self.a_gamma,
            self.b_gamma,
            self.a_phi,
            self.b_phi,
        ];
        let scale_pos = match self.scale {
            ScalePrior::Constant { a_c, b_c } => vec![a_c, b_c],
            ScalePrior::Hierarchical { sigma2_c, a_r, b_r } => vec![sigma2_c, a_r, b_r],
        };
        if pos.iter().chain(&scale_pos).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("prior hyperparameters must be positive".into()));
        }
        let m = self.eta_mean.len();
        if self.eta_cov.len() != m || self.eta_cov.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidParameter("eta covariance must be m x m".into()));
        }
        for i in 0..m {
            for j in 0..i {
                if (self.eta_cov[i][j] - self.eta_cov[j][i]).abs() > 1e-12 * (1.0 + self.eta_cov[i][j].abs()) {
                    return Err(Error::InvalidParameter("eta covariance must be symmetric".into()));
                }
            }
        }
        cholesky(&self.eta_cov)?;
        Ok(())
    }

    pub fn is_hierarchical(&self) -> bool {
        matches!(self.scale, ScalePrior::Hierarchical { .. })
    }

    /// `log N(η | μ, Σ)` up to the normalising constant.
    pub fn eta_log_prior(&self, eta: &[f64]) -> f64 {
        let l = cholesky(&self.eta_cov).expect("validated covariance");
        let d: Vec<f64> = eta.iter().zip(&self.eta_mean).map(|(a, b)| a - b).collect();
        let z = forward_solve(&l, &d);
        -0.5 * z.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn alpha_log_prior(&self, alpha: f64, gamma: f64) -> f64 {
        gamma_logpdf(alpha, self.a_alpha, gamma * self.b_alpha)
    }

    pub fn beta_log_prior(&self, beta: f64, gamma: f64) -> f64 {
        gamma_logpdf(beta, self.a_beta, gamma * self.b_beta)
    }

    pub fn phi_log_prior(&self, phi: f64) -> f64 {
        gamma_logpdf(phi, self.a_phi, self.b_phi)
    }

    /// Prior of one scale value; `r` is required for the hierarchical prior.
    pub fn scale_log_prior(&self, c: f64, r: Option<f64>) -> f64 {
        match self.scale {
            ScalePrior::Constant { a_c, b_c } => gamma_logpdf(c, a_c, b_c),
            ScalePrior::Hierarchical { sigma2_c, .. } => {
                let r = r.expect("hierarchical scale prior needs r");
                gamma_logpdf(c, r * r / sigma2_c, r / sigma2_c)
            }
        }
    }

    pub fn r_log_prior(&self, r: f64) -> f64 {
        match self.scale {
            ScalePrior::Hierarchical { a_r, b_r, .. } => gamma_logpdf(r, a_r, b_r),
            ScalePrior::Constant { .. } => 0.0,
        }
    }
}

pub(crate) fn identity(m: usize, v: f64) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| (0..m).map(|j| if i == j { v } else { 0.0 }).collect())
        .collect()
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return Err(Error::InvalidParameter("matrix is not positive-definite".into()));
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

fn forward_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i][i];
    }
    z
}

/// `L x` for lower-triangular `L`.
pub(crate) fn lower_mul(l: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    (0..x.len()).map(|i| (0..=i).map(|k| l[i][k] * x[k]).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let a = vec![vec![4.0, 2.0, 0.4], vec![2.0, 3.0, 0.5], vec![0.4, 0.5, 1.0]];
        let l = cholesky(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - a[i][j]).abs() < 1e-14);
            }
        }
        assert!(cholesky(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }

    #[test]
    fn validation() {
        let mut p = Priors::default_for(2, false);
        p.validate().unwrap();
        p.a_phi = 0.0;
        assert!(p.validate().is_err());
        let mut p = Priors::default_for(2, true);
        p.eta_cov[0][1] = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn eta_prior_is_quadratic_form() {
        let mut p = Priors::default_for(2, false);
        p.eta_cov = vec![vec![2.0, 0.5], vec![0.5, 1.0]];
        let eta = [0.3, -0.7];
        let det = 2.0 - 0.25;
        let inv = [[1.0 / det, -0.5 / det], [-0.5 / det, 2.0 / det]];
        let q = eta[0] * (inv[0][0] * eta[0] + inv[0][1] * eta[1]) + eta[1] * (inv[1][0] * eta[0] + inv[1][1] * eta[1]);
        assert!((p.eta_log_prior(&eta) + 0.5 * q).abs() < 1e-14);
    }
}
