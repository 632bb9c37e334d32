use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::fading_stats::FitReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or parameter violates its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The desired-symbol fading factor is exactly zero, so the detector
    /// statistic is undefined.
    #[error("degenerate channel: desired tap is zero")]
    DegenerateChannel,

    /// An analytically nonnegative quantity came out negative beyond rounding.
    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    /// The likelihood search exhausted its iteration budget. The best point
    /// seen so far is attached.
    #[error("fit did not converge within {iterations} iterations (best nll {:.6})", best.nll)]
    FitFailed {
        best: Box<FitReport>,
        iterations: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Parse(_) | Error::Json(_) => 2,
            Error::Io { .. } => 3,
            Error::FitFailed { .. } => 4,
            Error::DegenerateChannel | Error::Numerical(_) => 1,
        }
    }
}
