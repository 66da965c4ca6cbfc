use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or malformed input value.
    #[error("invalid input: {0}")]
    Input(String),

    /// Invalid configuration (grid, optimizer settings, discretization).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numerical routine did not reach its tolerance. The best estimate is attached.
    #[error("numerical failure: {message} (achieved estimate {estimate})")]
    Numerical { message: String, estimate: f64 },

    /// Requested operation is outside what the implementation supports.
    #[error("unsupported: {0}")]
    Capability(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
