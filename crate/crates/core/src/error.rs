use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the explainer can surface. Each variant maps to a stable,
/// machine-readable code (see [`Error::code`]) used by the CLI, the HTTP
/// service and the C ABI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error("unknown dataset schema '{0}'")]
    UnknownSchema(String),
    #[error("dataset is empty after removing rows with missing values")]
    EmptyDataset,
    #[error("cannot stratify: class '{class}' has {count} instance(s), need at least 2")]
    DegenerateSplit { class: String, count: usize },
    #[error("unknown model kind '{0}'")]
    UnknownModelKind(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("feature arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("requested foil '{0}' equals the model's output; there is no contrast to explain")]
    FoilEqualsFact(usize),
    #[error("class index {index} out of range for {n_classes} classes")]
    ClassOutOfRange { index: usize, n_classes: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("node {0} is not a leaf of this tree")]
    LeafNotInTree(usize),
    #[error("inconsistent conditions on feature {feature}: lower {lower} >= upper {upper}")]
    InconsistentConditions { feature: usize, lower: f64, upper: f64 },
    #[error("index {index} out of range (0..{len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model format error: {0}")]
    ModelFormat(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IO_ERROR",
            Error::MalformedCsv { .. } => "MALFORMED_CSV",
            Error::UnknownSchema(_) => "UNKNOWN_SCHEMA",
            Error::EmptyDataset => "EMPTY_DATASET",
            Error::DegenerateSplit { .. } => "DEGENERATE_SPLIT",
            Error::UnknownModelKind(_) => "UNKNOWN_MODEL_KIND",
            Error::InvalidHyperparameter(_) => "INVALID_HYPERPARAMETER",
            Error::LengthMismatch { .. } => "LENGTH_MISMATCH",
            Error::ArityMismatch { .. } => "ARITY_MISMATCH",
            Error::FoilEqualsFact(_) => "FOIL_EQUALS_FACT",
            Error::ClassOutOfRange { .. } => "CLASS_OUT_OF_RANGE",
            Error::InsufficientData(_) => "INSUFFICIENT_DATA",
            Error::LeafNotInTree(_) => "LEAF_NOT_IN_TREE",
            Error::InconsistentConditions { .. } => "INCONSISTENT_CONDITIONS",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::ModelFormat(_) => "MODEL_FORMAT",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
