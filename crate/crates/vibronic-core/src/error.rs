//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    /// An index or parameter fell outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operator/state shapes or Hilbert-space specs do not match.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix flagged as Hermitian failed the Hermiticity check.
    #[error("operator is not Hermitian: max |M - M\u{2020}| = {max_dev:.3e}")]
    NotHermitian { max_dev: f64 },

    /// The Fock cutoff is too small for the requested state or operator.
    #[error("Fock truncation too small ({context}); suggest n_max >= {suggested}")]
    Truncation { context: String, suggested: usize },

    /// A fixed-step integration drifted outside its stability tolerance.
    #[error("numerical instability: {0}")]
    Instability(String),

    /// A linear system could not be solved.
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// Invalid run or sequence configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// State validation failure (norm, trace, Hermiticity, positivity).
    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    /// I/O failure while emitting artifacts.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
