use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("schema: {0}")]
    Schema(String),

    #[error("ingestion: {malformed} of {total} rows malformed (more than 10%)")]
    Ingestion { malformed: usize, total: usize },

    #[error("numerical failure: {0}")]
    Numerical(snmarg::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl CliError {
    /// Process exit status for this class of failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Schema(_) => 3,
            CliError::Ingestion { .. } => 4,
            CliError::Numerical(_) => 5,
            CliError::Io { .. } => 6,
        }
    }

    /// I/O failure on `path`; a missing input file is a usage error.
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            return CliError::Usage(format!("{}: not found", path.display()));
        }
        CliError::Io { path, source }
    }
}

impl From<snmarg::Error> for CliError {
    fn from(e: snmarg::Error) -> Self {
        use snmarg::Error as E;
        match e {
            E::Csv(_) | E::Json(_) | E::Format(_) => CliError::Schema(e.to_string()),
            E::Io(source) => CliError::Io { path: PathBuf::new(), source },
            E::NoDraws => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
