//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("squared-cosine kernel requires scalar inputs, got dimension {dim}")]
    ScalarInputsRequired { dim: usize },

    #[error("{name} must be strictly positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error(
        "Cholesky factorization failed for {size}x{size} matrix: pivot {pivot:.3e} at index \
         {index} (jitter tried up to {max_jitter:.3e})"
    )]
    CholeskyFailure {
        size: usize,
        index: usize,
        pivot: f64,
        max_jitter: f64,
    },

    #[error("singular matrix in determinant or linear solve")]
    SingularMatrix,

    #[error("matrix is not symmetric positive semidefinite: {0}")]
    NotPsd(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite {what} encountered at parameters {params:?}")]
    NonFinite { what: &'static str, params: Vec<f64> },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("model/data mismatch: {0}")]
    ModelMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GpError> = std::result::Result<T, E>;
