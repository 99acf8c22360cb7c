use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("frame error: {0}")]
    Frame(#[from] FrameError),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("parse error in {source_name}: {message}")]
    Parse {
        source_name: String,
        message: String,
    },

    #[error("battery life undefined: average current is zero")]
    UndefinedLife,

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("buffer too short: need {need} bytes, got {got}")]
    Short { need: usize, got: usize },

    #[error("crc mismatch: frame carries {stored:#06x}, computed {computed:#06x}")]
    Crc { stored: u16, computed: u16 },

    #[error("bad log header")]
    BadMagic,

    #[error("log body length {0} is not a multiple of the record size")]
    Truncated(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
