use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("truncation level {depth} at dimension {dim} needs {required} tensor entries (budget {budget}); lower the depth or the path dimension")]
    Capacity { dim: usize, depth: usize, required: usize, budget: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
