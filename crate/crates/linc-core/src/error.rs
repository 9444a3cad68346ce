use thiserror::Error;

use crate::vars::VarSet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable index {index} out of range for {n} variables")]
    IndexOutOfRange { index: usize, n: usize },

    /// `I - B` (or a manipulated version of it) is numerically singular.
    #[error("model is not weakly stable: I - B is singular under intervention {subset}")]
    UnstableModel { subset: VarSet },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("invalid effect key: {0}")]
    InvalidKey(String),

    #[error("datasets disagree on the variable universe: {0}")]
    UniverseMismatch(String),

    #[error("operation requires a finite-sample dataset")]
    ExactPayload,

    #[error("could not generate a weakly stable model after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
