use num_complex::Complex64;
use thiserror::Error;

/// Errors raised anywhere in the kernel laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("point {point} is indeterminate: within {distance:.3e} of the boundary")]
    Indeterminate { point: Complex64, distance: f64 },

    #[error("guard violation: {0}")]
    Guard(String),

    #[error("boundary fields live on different grids")]
    GridMismatch,

    #[error("index {index} out of range ({context})")]
    Index { index: usize, context: &'static str },

    #[error("expected {expected} zeros, argument principle counted {counted:.6}")]
    CountMismatch { expected: usize, counted: f64 },

    #[error("linear system is singular to working precision: {0}")]
    Resolution(String),

    #[error("identity violated: {0}")]
    IdentityViolation(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("no relation found: {0}")]
    NoRelation(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
