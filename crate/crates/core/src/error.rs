use thiserror::Error;

/// Errors raised by the model, analytics and inference layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {what} = {index} (valid {lo}..={hi})")]
    Index {
        what: &'static str,
        index: usize,
        lo: usize,
        hi: usize,
    },

    #[error("stationarity violated: rho = {rho} must be < 1")]
    Stationarity { rho: f64 },

    #[error("operation requires a constant scale regime")]
    UnsupportedRegime,

    #[error("kernel truncation degenerate: no location accepted inside the window after {tries} tries")]
    DegenerateKernel { tries: usize },

    #[error("event {event} at t = {t} has zero mixture weight on every cell")]
    DegenerateAllocation { t: usize, event: usize },

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("moment order {0} unsupported (max 6)")]
    UnsupportedOrder(usize),

    #[error("draw archive is empty")]
    NoDraws,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed record: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_index(what: &'static str, index: usize, lo: usize, hi: usize) -> Result<()> {
    if index < lo || index > hi {
        Err(Error::Index { what, index, lo, hi })
    } else {
        Ok(())
    }
}
