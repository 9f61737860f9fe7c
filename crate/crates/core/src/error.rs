use thiserror::Error;

use crate::grid::DyadicCube;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dyadic level {v} is coarser than the box allows (minimum level {v_min})")]
    LevelBelowMinimum { v: i32, v_min: i32 },

    #[error("level {v_max} exceeds the Nyquist guard (maximum {limit})")]
    BandOverflow { v_max: i32, limit: i32 },

    #[error("exponent out of range: {0}")]
    InvalidExponent(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Luxemburg bisection did not converge: bracket [{lo}, {hi}]")]
    NoConvergence { lo: f64, hi: f64 },

    #[error("empty cube family")]
    EmptyCubeFamily,

    #[error("cube {0:?} does not meet the grid box")]
    CubeOutsideBox(DyadicCube),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("unknown check id `{0}`")]
    UnknownCheck(String),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
