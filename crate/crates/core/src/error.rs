use thiserror::Error;

/// Errors raised by the library and surfaced by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad point, mismatched space, bad configuration.
    #[error("validation error: {0}")]
    Validation(String),
    /// Argument outside the domain of a mathematical operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The operation is not available for the requested space.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Quadrature non-convergence, sampler budget exhaustion, degenerate factorizations.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
