use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("column {j} has zero norm or is flagged constant")]
    SingularColumn { j: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: u64, msg: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
