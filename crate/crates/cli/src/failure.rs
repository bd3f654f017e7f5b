use std::fmt;

use swr_core::SwrError;

/// Error categories with their process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// A check requested on the command line failed (exit 1).
    Check(String),
    /// Input could not be read or parsed (exit 2).
    Input(anyhow::Error),
    /// Invalid or conflicting options (exit 2).
    Usage(anyhow::Error),
    /// Data with inconsistent shapes (exit 3).
    Shape(anyhow::Error),
    /// Anything else, e.g. failing to write output (exit 1).
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Check(_) | Failure::Runtime(_) => 1,
            Failure::Input(_) | Failure::Usage(_) => 2,
            Failure::Shape(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(anyhow::anyhow!(msg.into()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Check(msg) => write!(f, "check failed: {msg}"),
            Failure::Input(e) => write!(f, "unreadable input: {e:#}"),
            Failure::Usage(e) => write!(f, "invalid options: {e:#}"),
            Failure::Shape(e) => write!(f, "shape error: {e:#}"),
            Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<SwrError> for Failure {
    fn from(e: SwrError) -> Self {
        match e {
            SwrError::Shape(_) | SwrError::Empty | SwrError::Divisibility { .. } => Failure::Shape(e.into()),
            SwrError::NonFinite(_) => Failure::Input(e.into()),
            SwrError::NotPowerOfTwo(_) | SwrError::Domain(_) | SwrError::Unknown { .. } => Failure::Usage(e.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, Failure>;
