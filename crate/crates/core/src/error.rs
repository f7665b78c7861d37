//! Error type shared by all numeric routines.

use thiserror::Error;

/// Errors produced by domain checks, solvers and quadrature.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid parameter combination (e.g. p >= r, degenerate exponents).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Requested value outside the attained range of a monotone function.
    #[error("range error: {what} = {value} outside attained range [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Quadrature or iteration did not converge; carries the residual estimate.
    #[error("numerical failure in {what}: residual {residual}")]
    Numerical { what: &'static str, residual: f64 },

    /// Internal inconsistency (e.g. classification disagrees with a solver).
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
