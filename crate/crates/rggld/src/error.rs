//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension `d` must be a positive integer.
    #[error("invalid dimension: d must be >= 1")]
    InvalidDimension,

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("invalid radius {0}: must satisfy 0 < r <= 1")]
    InvalidRadius(f64),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// Empirical measures of the empty graph are undefined.
    #[error("measure undefined: graph has no vertices")]
    UndefinedMeasure,

    #[error("domain error for `{field}`: {reason}")]
    Domain { field: &'static str, reason: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_parameter(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
