//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("normalization failed: {0}")]
    Normalization(String),

    #[error("no observation: depth image has no valid returns")]
    NoObservation,

    #[error("no zero crossing found in the sampled field")]
    EmptySurface,

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("unknown link '{0}'")]
    UnknownLink(String),

    #[error("inverse kinematics failed: {0}")]
    IkFailure(String),

    #[error("IoU undefined: union empty over all samples")]
    UndefinedIou,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("invalid kinematic chain: {0}")]
    ChainDefinition(String),

    #[error("planning failed after {attempts} seed attempts")]
    PlanningFailed { attempts: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
