use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("edge support is empty")]
    EmptySupport,

    #[error("node {0} has no incident candidate edge")]
    IsolatedNode(usize),

    #[error("node {0} has zero degree")]
    ZeroDegree(usize),

    #[error("input vector is not sorted ascending at position {0}")]
    Unsorted(usize),

    #[error("no theta gives exactly {k} non-zeros for this distance profile")]
    EmptyThetaInterval { k: usize },

    #[error("no node has at least {needed} incident candidate edges")]
    InsufficientCandidates { needed: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
