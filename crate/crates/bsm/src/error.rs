//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the separation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its valid range or otherwise unusable.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Operand shapes do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A NaN or infinity was encountered where finite values are required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Input does not carry enough linearly independent signal.
    #[error("rank deficient: {0}")]
    RankDeficient(String),

    /// A numerical routine failed (singular solve, diverged iteration, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Binary or structured input has the wrong format.
    #[error("format error: {0}")]
    Format(String),

    /// Run configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
