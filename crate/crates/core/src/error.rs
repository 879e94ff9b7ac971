use thiserror::Error;

/// Errors raised by the library. Variants name the failed precondition.
#[derive(Debug, Error)]
pub enum WallError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("not a wall-like configuration: {0}")]
    NotWallLike(String),
    #[error("inadmissible initial data: {0}")]
    Inadmissible(String),
    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),
    #[error("tails are not flat: {0}")]
    NonFlatTails(String),
    #[error("insufficient margin: {0}")]
    InsufficientMargin(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("charge support touches the padding boundary")]
    SupportTouchesBoundary,
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, WallError>;
