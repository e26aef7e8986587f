//! Scalar abstraction shared by every numeric module.
//!
//! All model code is written against [`Real`]; `f64` is the working precision
//! and `f32` is supported for memory-bound simulation. Special functions and
//! the primitive random draws are routed through the trait so the generic code
//! never has to name concrete distribution bounds.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Sum
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// `ln Γ(x)` for `x > 0`.
    fn lgamma(self) -> Self;

    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Gamma draw with the given shape and *scale*; both must be positive.
    fn gamma_draw<G: Rng + ?Sized>(shape: Self, scale: Self, rng: &mut G) -> Self;

    /// Poisson draw; `mean` must be positive and finite.
    fn poisson_draw<G: Rng + ?Sized>(mean: Self, rng: &mut G) -> u64;

    fn std_normal_draw<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// Uniform draw on `[0, 1)`.
    fn unit_draw<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

macro_rules! impl_real {
    ($t:ty, $lgamma:path, $erfc:path) => {
        impl Real for $t {
            #[inline]
            fn lgamma(self) -> Self {
                $lgamma(self)
            }

            #[inline]
            fn erfc(self) -> Self {
                $erfc(self)
            }

            #[inline]
            fn gamma_draw<G: Rng + ?Sized>(shape: Self, scale: Self, rng: &mut G) -> Self {
                Gamma::new(shape, scale)
                    .expect("validated gamma parameters")
                    .sample(rng)
            }

            #[inline]
            fn poisson_draw<G: Rng + ?Sized>(mean: Self, rng: &mut G) -> u64 {
                let draw: $t = Poisson::new(mean)
                    .expect("validated Poisson mean")
                    .sample(rng);
                draw as u64
            }

            #[inline]
            fn std_normal_draw<G: Rng + ?Sized>(rng: &mut G) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn unit_draw<G: Rng + ?Sized>(rng: &mut G) -> Self {
                rng.random::<$t>()
            }
        }
    };
}

impl_real!(f64, libm::lgamma, libm::erfc);
impl_real!(f32, libm::lgammaf, libm::erfcf);

/// Standard normal CDF, evaluated through `erfc` so both tails stay accurate.
#[inline]
pub fn std_normal_cdf<R: Real>(z: R) -> R {
    R::lit(0.5) * (-z / R::SQRT_2()).erfc()
}

/// `log(Σ exp(x_i))`, returning `-∞` for an empty or all-`-∞` input.
pub fn log_sum_exp<R: Real>(xs: &[R]) -> R {
    let max = xs.iter().copied().fold(R::neg_infinity(), R::max);
    if max == R::neg_infinity() {
        return max;
    }
    if max == R::infinity() {
        return max;
    }
    let s: R = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn special_functions_match_known_values() {
        assert!((5.0f64.lgamma() - 24f64.ln()).abs() < 1e-13);
        assert!((0.5f64.lgamma() - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!((std_normal_cdf(0.0f64) - 0.5).abs() < 1e-15);
        assert!((std_normal_cdf(1.959963984540054f64) - 0.975).abs() < 1e-12);
        assert!((std_normal_cdf(2.0f32) - 0.97724986).abs() < 1e-6);
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[1000.0f64, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
