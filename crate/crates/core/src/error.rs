use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MscError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MscError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Raised by the bounds evaluators when `R <= K / (1 - gamma)` or the
    /// drift constants are otherwise out of range.
    #[error("invalid drift specification: {0}")]
    InvalidDrift(String),

    #[error("importance weights have zero total mass (every log-weight is -inf)")]
    ZeroTotalWeight,

    #[error("non-finite log-weight {value} at atom {index}")]
    NonFiniteWeight { index: usize, value: f64 },

    #[error("chain {chain} did not return to C within {cap} steps")]
    CapExceeded { chain: usize, cap: u64 },

    #[error("{what} did not terminate within {cap} iterations")]
    IterationCap { what: &'static str, cap: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("{}:{line}: {message}", path.display())]
    Dataset {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl MscError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        MscError::InvalidArgument(msg.into())
    }
}
