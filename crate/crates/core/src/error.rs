use thiserror::Error;

/// Errors raised by the solvers and their data model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwrError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty sequence")]
    Empty,

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("sequence length {n} is not divisible by block size {block}")]
    Divisibility { n: usize, block: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, SwrError>;
