use thiserror::Error;

/// Errors produced by the model, the optimizer and the experiment harness.
#[derive(Debug, Error)]
pub enum MaoiError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("at least {required} frames are required, got {got}")]
    TooFewFrames { required: usize, got: usize },

    #[error("frame {index} has {got} values, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },

    #[error("frame {0} contains no detected points")]
    EmptyFrame(usize),

    #[error("device index {index} out of range for {count} devices")]
    DeviceIndex { index: usize, count: usize },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("config: {0}")]
    Config(#[from] toml::de::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MaoiError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> MaoiError {
    MaoiError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
