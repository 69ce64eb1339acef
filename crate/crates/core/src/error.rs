use thiserror::Error;

/// Errors raised by the recovery library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SgnError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error(
        "materialized ensemble needs {needed} bytes, above the cap of {cap} bytes; use streamed storage"
    )]
    Capacity { needed: u128, cap: u128 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

pub type Result<T> = std::result::Result<T, SgnError>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(SgnError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
