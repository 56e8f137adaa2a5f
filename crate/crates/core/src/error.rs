use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::Frame;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame mismatch: expected `{expected}`, found `{found}`")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("index {index} out of bounds for cloud of {len} points")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("k = {k} out of range for cloud of {len} points")]
    KOutOfRange { k: usize, len: usize },

    #[error("no plane found: {0}")]
    NoPlane(&'static str),

    #[error("degenerate neighborhood: {0}")]
    Degenerate(&'static str),

    #[error("descriptor mismatch: {0}")]
    DescriptorMismatch(String),

    #[error("cloud has no colors")]
    Colorless,

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("timestamp {t} does not follow previous timestamp {prev}")]
    NonMonotonicTime { prev: f64, t: f64 },

    #[error("goal outside workspace: {0}")]
    Unreachable(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
