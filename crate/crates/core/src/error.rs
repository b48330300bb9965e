use std::path::PathBuf;

use thiserror::Error;

/// Every failure the pipeline can report.
///
/// Each variant maps to a distinct process exit code through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("span out of bounds at line {line}: {reason}")]
    SpanOutOfBounds { line: usize, reason: String },
    #[error("duplicate uid {uid:?} at line {line}")]
    DuplicateUid { line: usize, uid: String },
    #[error("head and tail spans overlap in instance {0:?}")]
    OverlappingSpans(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("requested {requested} relations but only {available} are available")]
    NOutOfRange { requested: usize, available: usize },
    #[error("cap of {max_total} examples cannot keep one instance for each of {relations} relations")]
    CapTooSmall { max_total: usize, relations: usize },
    #[error("insufficient relations: {0}")]
    InsufficientRelations(String),
    #[error("insufficient instances: {0}")]
    InsufficientInstances(String),
    #[error("unsatisfiable configuration: {0}")]
    UnsatisfiableConfig(String),
    #[error("NOTA queries requested but the part has no relation outside the {0} episode relations")]
    NoNotaSource(usize),
    #[error("encoder bridge unavailable: {0}")]
    BridgeUnavailable(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training loss became non-finite at step {0}")]
    DivergedLoss(usize),
    #[error("dev set needs at least one SAME and one DIFFERENT pair")]
    DegenerateDevSet,
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("no result files to report")]
    NoResults,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::FileNotFound(_) => 10,
            Error::MalformedRecord { .. } => 11,
            Error::SpanOutOfBounds { .. } => 12,
            Error::DuplicateUid { .. } => 13,
            Error::OverlappingSpans(_) => 14,
            Error::EmptyCorpus => 20,
            Error::NOutOfRange { .. } => 21,
            Error::CapTooSmall { .. } => 22,
            Error::InsufficientRelations(_) => 30,
            Error::InsufficientInstances(_) => 31,
            Error::UnsatisfiableConfig(_) => 32,
            Error::NoNotaSource(_) => 33,
            Error::BridgeUnavailable(_) => 40,
            Error::EmptyText => 41,
            Error::DimensionMismatch(..) => 42,
            Error::NonFinite(_) => 45,
            Error::EmptyTrainingSet => 43,
            Error::DivergedLoss(_) => 44,
            Error::DegenerateDevSet => 50,
            Error::EmptyEvalSet => 51,
            Error::NoResults => 52,
            Error::InvalidConfig(_) => 60,
            Error::InvalidCheckpoint(_) => 61,
            Error::Io(_) => 70,
            Error::Json(_) => 71,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
