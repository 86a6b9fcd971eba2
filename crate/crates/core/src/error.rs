use thiserror::Error;

/// Errors raised by the enhancement pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// Sample values or tensors that cannot be processed (non-finite, empty).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Inconsistent or out-of-range configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Tensor or spectrogram shapes that do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// WAV files the pipeline does not accept (channels, rate, encoding).
    #[error("audio format: {0}")]
    AudioFormat(String),

    /// Malformed weights containers or missing tensors.
    #[error("weights: {0}")]
    Weights(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
