use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("wrong image shape: expected 16x16, got {rows}x{cols}")]
    ImageShape { rows: usize, cols: usize },

    #[error("proximal parameter {rho} must exceed the weak convexity constant {mu}")]
    NotStronglyConvex { rho: f64, mu: f64 },

    #[error("inner solver did not converge after {iters} iterations (residual {residual:e})")]
    NotConverged { iters: usize, residual: f64 },

    #[error("at iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
