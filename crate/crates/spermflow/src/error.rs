//! Crate-wide error type and exit-code categories.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// How a failure maps to a process exit code.
///
/// `Usage` covers bad inputs and malformed files (exit 2), `Numerical`
/// covers divergence and non-finite values (exit 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("no frames found in {0}")]
    NoFrames(PathBuf),

    #[error("inconsistent frame dimensions in {path}: frame {index} is {got:?}, expected {expected:?}")]
    InconsistentFrames {
        path: PathBuf,
        index: usize,
        got: (u32, u32),
        expected: (u32, u32),
    },

    #[error("frame index {index} out of range (frame count {count})")]
    FrameOutOfRange { index: usize, count: usize },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("flow input mismatch: {0}")]
    FlowInput(String),

    #[error("frame {got:?} smaller than polynomial window {need}")]
    FrameTooSmall { got: (usize, usize), need: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("label file {path}, row {row}: {reason}")]
    BadLabel {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("fold file {path}: {reason}")]
    BadFold { path: PathBuf, reason: String },

    #[error("video {0} too short: {1} frames, chunk needs {2}")]
    VideoTooShort(String, usize, usize),

    #[error("dataset file {path}: {reason}")]
    BadDataset { path: PathBuf, reason: String },

    #[error("weight file {path}: {reason}")]
    BadWeights { path: PathBuf, reason: String },

    #[error("shape mismatch in {op}: {details}")]
    ShapeMismatch { op: String, details: String },

    #[error("unknown model variant: {0}")]
    UnknownVariant(String),

    #[error("invalid model config: {0}")]
    InvalidModelConfig(String),

    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn shape(op: &str, details: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op: op.to_string(),
            details: details.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::NonFiniteGradient(_) | Error::NumericalFailure(_) => ErrorCategory::Numerical,
            _ => ErrorCategory::Usage,
        }
    }

    /// Process exit code for this error (success is 0).
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Usage => 2,
            ErrorCategory::Numerical => 3,
        }
    }
}
