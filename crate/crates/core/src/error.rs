use std::io;

use thiserror::Error;

/// Errors raised by model construction, sampling, estimation and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model construction failed: {0}")]
    ConstructionFailure(String),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("infeasible estimator configuration: {0}")]
    InfeasibleConfig(String),
    #[error("correlation width {width} does not divide series length {len}")]
    WidthMismatch { width: usize, len: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate quadratic form: a and b are both zero")]
    DegenerateForm,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("input must be positive, got {0}")]
    NonpositiveInput(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConstructionFailure(_) | Error::NotPositiveDefinite { .. } | Error::DomainError(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
