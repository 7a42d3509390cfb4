use thiserror::Error;

use crate::lp::LpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear program: {0}")]
    Lp(#[from] LpError),

    #[error("inconsistent observational or prior data at state {state}, action {action}")]
    InconsistentData { state: usize, action: usize },

    #[error("action {action} was never observed at state {state}")]
    UnobservedAction { state: usize, action: usize },

    #[error("state {state} was never observed")]
    UnobservedState { state: usize },

    #[error("response mapping enumeration {outcomes}^{actions} exceeds the cap of {cap}")]
    EnumerationTooLarge {
        outcomes: usize,
        actions: usize,
        cap: usize,
    },

    #[error("transition interval set is empty (sum of lower bounds {lo_sum}, sum of upper bounds {hi_sum})")]
    EmptyAmbiguitySet { lo_sum: f64, hi_sum: f64 },

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
