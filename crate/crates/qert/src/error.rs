//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("{0}")]
    Parse(#[from] crate::parser::ParseError),

    #[error("invalid program:\n{0}")]
    Validation(crate::program::ValidationReport),

    #[error("{context}: expected dimension {expected}, got {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |A - A†| = {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("not a valid density matrix: {reason}")]
    InvalidDensity { reason: String },

    #[error("not a valid state: {reason}")]
    InvalidState { reason: String },

    #[error(
        "transfer matrix has an eigenvalue of modulus {modulus:.6} > 1; \
         the map it represents increases trace"
    )]
    SpectrumExceedsUnit { modulus: f64 },

    #[error("Neumann inversion failed: {reason}")]
    NeumannSingular { reason: String },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Shorthand for ad-hoc invalid-argument errors.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
