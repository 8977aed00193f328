use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mixture has no atoms")]
    EmptyMixture,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("family mismatch: {0}")]
    FamilyMismatch(String),

    #[error("quadrature grid too coarse: doubling the resolution moved the estimate by {shift:.3e} (tolerance {tolerance:.3e})")]
    GridTooCoarse { shift: f64, tolerance: f64 },

    #[error("labels must be 0 or 1, found {value} at row {row}")]
    NonBinaryLabel { row: usize, value: f64 },

    #[error("{0}")]
    WrongModelKind(String),

    #[error("reparameterization gradient requested but the model has no gradient")]
    MissingGradient,

    #[error("non-finite RELBO objective at step {step} after restart")]
    NonFiniteObjective { step: usize },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("{path}: row {row}, column `{column}`: {reason}")]
    BadCell {
        path: PathBuf,
        row: usize,
        column: String,
        reason: String,
    },

    #[error("{path}: {reason}")]
    BadCsv { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
