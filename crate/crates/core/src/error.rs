use thiserror::Error;

/// Errors produced by the estimators, interval constructions and I/O helpers.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: unsorted abscissae, mismatched lengths, tied times, etc.
    #[error("validation error: {0}")]
    Validation(String),

    /// A parameter outside the admissible range (a ∉ (0,1), t outside the domain, h ≥ b, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// No function in the model satisfies the requested pointwise constraint(s).
    #[error("constraint infeasible: {0}")]
    Infeasible(String),

    /// An iterative solve did not reach its tolerance.
    #[error("no convergence: {what} (residual {residual:e} after {iterations} iterations)")]
    NonConvergence {
        what: String,
        residual: f64,
        iterations: usize,
    },

    /// Data that cannot support the requested computation (empty sample, zero denominator, ...).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("checksum mismatch: expected {expected}, found {found}")]
    Checksum { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
