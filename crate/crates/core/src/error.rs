use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate turn id `{0}`")]
    DuplicateTurnId(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid interpretation: {0}")]
    InvalidInterpretation(String),

    #[error("invalid turn `{turn_id}`: {reason}")]
    InvalidTurn { turn_id: String, reason: String },

    #[error("invalid session `{session_id}`: {reason}")]
    InvalidSession { session_id: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("turn `{0}` has no oracle interpretation")]
    MissingOracle(String),

    #[error("turns `{earlier}` and `{later}` belong to different sessions")]
    CrossSession { earlier: String, later: String },

    #[error("malformed record at {path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("no defects in the training split")]
    NoDefects,

    #[error("empty high-value set: no (defect, non-defective rephrase) pairs found")]
    EmptyHighValueSet,

    #[error("training data contains a single class (label {0})")]
    SingleClass(bool),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {loss}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },

    #[error("feature `{feature}`: token id {id} outside vocabulary of size {size}")]
    OutOfVocabulary { feature: String, id: usize, size: usize },

    #[error("feature `{feature}`: expected dimension {expected}, got {got}")]
    DimensionMismatch { feature: String, expected: usize, got: usize },

    #[error("feature `{0}` has non-finite values")]
    NonFiniteFeature(String),

    #[error("feature `{0}` missing from bundle")]
    MissingFeature(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("artifact `{}` is missing", .0.display())]
    MissingArtifact(PathBuf),

    #[error("config hash mismatch for stage `{stage}`: {diff}")]
    HashMismatch { stage: String, diff: String },
}
