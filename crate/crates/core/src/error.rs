use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("unphysical circuit: {0}")]
    Unphysical(String),

    #[error("L = {l} mm is outside the declared domain [{min}, {max}] mm")]
    OutsideDomain { l: f64, min: f64, max: f64 },

    #[error("at L = {l} mm: {source}")]
    AtSweepPoint {
        l: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("need at least 2 branches in the region, found {found}")]
    InsufficientBranches { found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("inconsistent frequency grid at L = {l} mm: {message}")]
    InconsistentGrid { l: f64, message: String },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
