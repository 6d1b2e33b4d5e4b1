use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PinningError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("horizon insufficient: {0}")]
    Horizon(String),
    #[error("boundary case, unclassified: {0}")]
    Boundary(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, PinningError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(PinningError::Domain(msg.into()))
}
