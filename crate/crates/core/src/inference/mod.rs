//! Particle Gibbs inference for the `f64` model.

pub mod adapt;
pub mod archive;
pub mod conditionals;
pub mod csmc;
pub mod validation;
pub mod gibbs;
pub mod priors;
pub mod state;

pub use archive::{read_draws, summarize, write_draws, ChainSummary, ParamSummary};
pub use conditionals::{complete_loglik, log_prior, Move, PhiTarget};
pub use csmc::{csmc_sweep, SmcConfig};
pub use gibbs::{forecast, particle_gibbs_step, run_chain, simulate_latent_path, simulate_observations, ChainConfig, ChainOutput, Draw, DrawParams, Forecast, ForecastStep, UpdateFlags};
pub use priors::{Priors, ScalePrior};
pub use state::{draw_from_prior, ChainState, InferenceData, PriorDraw, RegimeKind};
