use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("channel {channel} out of range (tensor has {channels})")]
    ChannelOutOfRange { channel: usize, channels: usize },

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),

    #[error("not a flow file (magic {0})")]
    NotAFlowFile(f32),

    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("invalid class table: {0}")]
    ClassTable(String),

    #[error("label {label} at pixel {index} is not in the class table")]
    UnknownLabel { label: u8, index: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u8, classes: usize },

    #[error("no road component passes the area threshold")]
    NoRoad,

    #[error("structuring element size must be odd, got {0}")]
    EvenElement(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coincident points: direction undefined")]
    Coincident,

    #[error("start ({x}, {y}) is not a road pixel")]
    StartNotRoad { x: f64, y: f64 },

    #[error("undefined: {0}")]
    Undefined(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("scene generation failed after {attempts} attempts: {reason}")]
    SceneInfeasible { attempts: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn mismatch(expected: impl std::fmt::Display, actual: impl std::fmt::Display) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Whether the error was caused by bad input data rather than a bug or an
    /// environment failure. The CLI maps these to exit code 2.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::ChannelOutOfRange { .. } | Error::Coincident)
    }
}
