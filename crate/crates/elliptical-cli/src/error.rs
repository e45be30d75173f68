//! Error classes mapped onto distinct process exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or flag combinations. Exit code 2 (same as clap's own).
    #[error("usage error: {0}")]
    Usage(String),

    /// Unreadable, malformed, or inconsistent data. Exit code 3.
    #[error("data error: {0}")]
    Data(String),

    /// Numerical or training failure. Exit code 4.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Anything else (I/O on outputs, serialization). Exit code 5.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Internal(_) => 5,
        }
    }
}

impl From<elliptical::EllipticalError> for CliError {
    fn from(e: elliptical::EllipticalError) -> Self {
        use elliptical::EllipticalError as E;
        match e {
            E::InvalidConfig(m) => CliError::Usage(m),
            E::DimensionMismatch(m) => CliError::Data(m),
            E::Domain(m) => CliError::Numeric(m),
            E::Overflow(_) | E::Underflow | E::Convergence(_) => CliError::Numeric(e.to_string()),
            E::CholeskyFailed { .. } => CliError::Numeric(e.to_string()),
            E::Training(m) => CliError::Numeric(m),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
