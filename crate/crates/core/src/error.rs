use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension {dim} exceeds the dense cap {cap}; use the matrix-free path")]
    Capacity { dim: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("frame following lost for label {label} at t = {t}: overlap {overlap:.6}")]
    FrameFollowing { label: String, t: f64, overlap: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
