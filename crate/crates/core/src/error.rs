use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("{side} half of the network is empty")]
    EmptyHalf { side: &'static str },

    #[error("operating point outside the hybrid regime: {0}")]
    OutOfRegime(String),

    #[error("closed-form SNR_tot table does not apply when w_hat = sqrt(n)")]
    TableNotApplicable,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cut certification failed: clearance {clearance} < required {required}")]
    Certification { clearance: f64, required: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
