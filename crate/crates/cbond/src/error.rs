//! Error types shared across the pricing library.

use thiserror::Error;

/// Errors produced by validation, numerical kernels and pricing routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A multivariate normal problem exceeded the configured dimension cap.
    #[error("dimension {dim} exceeds the configured maximum {max}")]
    Dimension { dim: usize, max: usize },

    /// A numerical routine failed to converge or bracket.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The requested computation lies outside the supported payoff regime.
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::UnsupportedCase(msg.into())
    }
}
