//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation
    /// (non-finite values, kernel domain violations, responses outside the
    /// family's range, invalid parameters).
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector/matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical routine failed (CG breakdown or stagnation, eigensolve
    /// failure, every candidate diverged).
    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI maps this error to: input problems are 2,
    /// numerical failures are 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Dimension(_) => 2,
            Error::Solver(_) => 3,
        }
    }
}
