use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("non-finite value at index {index} in {what}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },

    #[error("interpolation target {target} outside source range [{lo}, {hi}]")]
    Extrapolation { target: f64, lo: f64, hi: f64 },

    #[error("instrument has zero sample variance; cannot standardize")]
    ZeroVariance,

    #[error("regularization parameter must be positive and finite, got {0}")]
    InvalidAlpha(f64),

    #[error("every alpha on the grid produced a non-finite residual")]
    NoFiniteResidual,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("replication {replication} failed: {source}")]
    Replication {
        replication: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: row {row}, column `{column}`: {message}")]
    Cell {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
