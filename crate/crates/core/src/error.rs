use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("frequency grids differ")]
    GridMismatch,

    #[error("domain mismatch: expected {expected}, found {found}")]
    DomainMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("singular matrix at {f_hz:.6} Hz (|det| = {det:e})")]
    Singular { f_hz: f64, det: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no steady-state operating point: {0}")]
    OperatingPoint(String),

    #[error("simulation diverged at t = {t:.6} s")]
    Diverged { t: f64 },

    #[error("simulation did not settle within {t_end:.3} s")]
    NotSettled { t_end: f64 },

    #[error("window of {window_s} s is not commensurate with {f_hz} Hz")]
    NonCommensurate { f_hz: f64, window_s: f64 },

    #[error("injected current at {f_hz:.3} Hz is below the noise floor")]
    BelowNoiseFloor { f_hz: f64 },

    #[error("ill-conditioned injection pair at {f_hz:.3} Hz (cond = {cond:.3e})")]
    IllConditioned { f_hz: f64, cond: f64 },

    #[error("{stage} failed at {f_hz:.3} Hz ({injection}): {source}")]
    Stage {
        stage: &'static str,
        f_hz: f64,
        injection: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error in {path}: {msg}")]
    Csv { path: PathBuf, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular { .. }
            | Error::Diverged { .. }
            | Error::NotSettled { .. }
            | Error::OperatingPoint(_)
            | Error::BelowNoiseFloor { .. }
            | Error::IllConditioned { .. } => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
