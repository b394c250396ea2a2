use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("hole {hole} is not aligned with the level-{level} grid")]
    HoleAlignment { hole: usize, level: u32 },

    #[error("tree with {leaves} leaf cells cannot carry {required} vanishing-moment conditions")]
    Capacity { leaves: usize, required: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("parameter `{name}` = {value} violates {constraint}")]
    Parameter {
        name: &'static str,
        value: f64,
        constraint: String,
    },

    #[error("quadrature did not reach tolerance: {0}")]
    Quadrature(String),

    #[error("matrix is not positive definite: pivot {pivot:e} in column {column}")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("singular pivot {pivot:e} in column {column}")]
    SingularPivot { column: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("fill oracle refuses graphs with {vertices} vertices (cutoff {cutoff})")]
    OracleTooLarge { vertices: usize, cutoff: usize },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
