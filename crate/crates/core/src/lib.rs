//! Discrete-time spatiotemporal gamma shot-noise Cox process.
//!
//! The latent intensity is a measure-valued autoregressive gamma process on a
//! gridded base measure; events are a Cox process driven by a Gaussian kernel
//! smoothing of that measure and a global covariate factor `κ_t`.
//!
//! Numeric code is generic over [`Real`]; the `*64` / `*32` aliases below fix
//! the precision. Inference runs in `f64`.

pub mod analytics;
pub mod dists;
pub mod error;
pub mod grid;
pub mod inference;
pub mod io;
pub mod marg;
pub mod obs;
pub mod real;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{Grid, Rect};
pub use marg::{InitialLaw, LagParams, LatentPath, MargParams, ScaleRegime};
pub use obs::{CovariateDesign, CovariateModel, Event, KernelSpec, ModelSpec, PointSeries};
pub use real::Real;
pub use rng::SeedKey;

pub type Rect64 = Rect<f64>;
pub type Rect32 = Rect<f32>;
pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type LatentPath64 = LatentPath<f64>;
pub type LatentPath32 = LatentPath<f32>;
pub type MargParams64 = MargParams<f64>;
pub type MargParams32 = MargParams<f32>;
pub type ModelSpec64 = ModelSpec<f64>;
pub type ModelSpec32 = ModelSpec<f32>;
pub type PointSeries64 = PointSeries<f64>;
pub type PointSeries32 = PointSeries<f32>;
