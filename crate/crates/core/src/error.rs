use thiserror::Error;

#[derive(Error, Debug)]
pub enum IdrlError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IdrlError>;

pub(crate) fn invalid(msg: impl Into<String>) -> IdrlError {
    IdrlError::InvalidArgument(msg.into())
}
