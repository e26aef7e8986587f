//! Batch front end for the `snmarg` library: MODIS-style CSV ingestion, JSON
//! run configuration and the `simulate`, `fit`, `analyze`, `forecast` and
//! `diagnose` commands.
//!
//! Geographic coordinates are used as planar coordinates in degrees, with no
//! projection. This is adequate at the scale of a regional grid; distances
//! near the poles are distorted.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod output;

pub use commands::{run, Command, Options};
pub use config::RunConfig;
pub use error::{CliError, Result};

/// Environment variable holding the worker count for parallel chains.
pub const WORKERS_ENV: &str = "SNMARG_WORKERS";

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}
