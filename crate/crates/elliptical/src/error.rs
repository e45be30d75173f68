//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EllipticalError {
    #[error("domain error: {0}")]
    Domain(String),

    /// A quantity exceeded the f64 range. Never silently returned as
    /// infinity; callers that can work in log space should.
    #[error("overflow in {0}")]
    Overflow(&'static str),

    /// Every term of a mixture sum underflowed to zero.
    #[error("all mixture terms underflowed; the model is ill-conditioned")]
    Underflow,

    #[error("{0} did not converge")]
    Convergence(&'static str),

    #[error("Cholesky decomposition failed after jitter escalation up to {max_jitter:e}")]
    CholeskyFailed { max_jitter: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training failed: {0}")]
    Training(String),
}

pub type Result<T> = std::result::Result<T, EllipticalError>;
