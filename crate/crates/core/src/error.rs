use thiserror::Error;

use crate::hdmde::ZReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The constrained EM update hit a non-positive denominator or the inner
    /// multiplier solve diverged. `theta` is the last iterate.
    #[error("EM update failed at iteration {iteration}: {msg}")]
    EmFailure {
        iteration: usize,
        msg: String,
        theta: Vec<f64>,
    },

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("model-size selection failed: {msg}")]
    Selection { msg: String, trace: Vec<ZReport> },

    #[error("PME iteration {iteration} failed: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// Whether the error stems from bad input rather than from the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Format(_) | Error::Invalid(_) | Error::Unsupported(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
