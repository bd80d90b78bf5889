//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by any operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A byte stream could not be decoded as the expected file format.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// The request exceeds a documented size limit.
    #[error("unsupported scale: {0}")]
    UnsupportedScale(String),

    /// A metric is mathematically undefined on the given inputs.
    #[error("undefined: {0}")]
    Undefined(String),

    /// An iterative solver stopped at its iteration cap without meeting
    /// its tolerance.
    #[error("solver did not converge within {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }
}
