use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("training set is empty: at least one profiling period is required")]
    EmptyTrainingSet,

    #[error("profile configuration mismatch: {0}")]
    ProfileConfigMismatch(String),

    #[error("fraction {0} is outside [0, 1]")]
    InvalidFraction(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: invalid {field}: {message}")]
    TraceParse {
        line: u64,
        field: &'static str,
        message: String,
    },

    #[error("line {line}: timestamp {timestamp} precedes previous timestamp {previous}")]
    NonMonotoneTrace {
        line: u64,
        timestamp: f64,
        previous: f64,
    },

    #[error("invalid profile document: {0}")]
    InvalidProfile(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 1 for usage/configuration problems, 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidFraction(_) => 1,
            _ => 2,
        }
    }
}
