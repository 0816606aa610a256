use thiserror::Error;

/// Errors raised anywhere in the style-space pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible tensor or vector shapes.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A value outside the domain of an operation (e.g. log of a non-positive number).
    #[error("domain error: {0}")]
    Domain(String),
    /// A caller-side precondition was violated.
    #[error("contract violation: {0}")]
    Contract(String),
    /// NaN or infinite values appeared during computation.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A file did not match its expected binary or text format.
    #[error("format error: {0}")]
    Format(String),
    /// Input data was missing or unusable.
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}

pub(crate) fn contract_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
