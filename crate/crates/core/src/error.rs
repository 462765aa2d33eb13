use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file; `line` is 1-based.
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("protocol parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("span out of bounds: {0}")]
    Address(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format { line, msg: msg.into() }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
