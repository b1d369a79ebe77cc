use std::path::PathBuf;

/// Errors raised by the simulation, learning and scoring layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("step profile has no segments")]
    EmptyProfile,

    #[error("step profile segments must have strictly increasing start times")]
    UnsortedProfile,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dead time {dead_time} s is not an integer multiple of the step {h} s")]
    DeadTime { dead_time: f64, h: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("decoupler is singular (det = {0:e})")]
    SingularDecoupler(f64),

    #[error("time {t} s is outside the network domain [{lo}, {hi}]")]
    OutsideDomain { t: f64, lo: f64, hi: f64 },

    #[error("event window [{start}, {end}) s is outside the grid [{t0}, {tf}]")]
    WindowOutsideGrid {
        start: f64,
        end: f64,
        t0: f64,
        tf: f64,
    },

    #[error("relative index needs a positive reference, got {0}")]
    NonPositiveReference(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
