//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A layer received an input whose width does not match its weights.
    #[error("layer {layer}: expected input of width {expected}, got {got}")]
    LayerShapeMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },

    /// Generic shape disagreement between two arguments.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A configuration value failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Input data failed validation (non-finite cells, bad labels, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// The loss evaluated to a non-finite value on the given batch indices.
    #[error("non-finite loss over batch indices {indices:?}")]
    NonFiniteLoss { indices: Vec<usize> },

    /// Training produced a non-finite loss or parameter.
    #[error("training diverged at epoch {epoch}, step {step}: {source}")]
    TrainingDiverged {
        epoch: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// One member of an ensemble failed to train.
    #[error("ensemble member {member} failed: {source}")]
    MemberFailed {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    /// One replication of an experiment failed.
    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// A feature cache was built from an older version of the network.
    #[error("stale feature cache: cache version {cache}, net version {net}")]
    StaleCache { cache: u64, net: u64 },

    /// A model file could not be parsed.
    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed or invalid input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidData(_) | Error::Csv(_) | Error::ModelFormat(_)
        )
    }

    /// True for numerical failures (divergence, non-finite values).
    pub fn is_numerical_error(&self) -> bool {
        match self {
            Error::NonFiniteLoss { .. } => true,
            Error::TrainingDiverged { .. } => true,
            Error::MemberFailed { source, .. } | Error::Replication { source, .. } => {
                source.is_numerical_error()
            }
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
