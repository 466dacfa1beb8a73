use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("cycle detected in parent links at entity `{0}`")]
    Cycle(String),
    #[error("entity `{id}` references missing parent `{parent}`")]
    DanglingParent { id: String, parent: String },
    #[error("duplicate entity id `{0}`")]
    DuplicateId(String),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("entity `{entity}` is not a candidate of vertex {vertex}")]
    EntityNotInVertex { entity: String, vertex: usize },
    #[error("invalid annotation `{point}`: {message}")]
    InvalidAnnotation { point: String, message: String },
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("vocabulary size {n} out of range 1..={max}")]
    SizeOutOfRange { n: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing feature vector for point `{0}`")]
    MissingFeature(String),
    #[error("pool for `{0}` spans fewer than two child classes")]
    InsufficientChildren(String),
    #[error("missing ground truth for point `{0}`")]
    MissingGroundTruth(String),
    #[error("image `{0}` is not covered by the reference")]
    ImageMismatch(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Cycle(_) => "cycle",
            Error::DanglingParent { .. } => "dangling_parent",
            Error::DuplicateId(_) => "duplicate_id",
            Error::UnknownEntity(_) => "unknown_entity",
            Error::EntityNotInVertex { .. } => "entity_not_in_vertex",
            Error::InvalidAnnotation { .. } => "invalid_annotation",
            Error::Inconsistent(_) => "inconsistent",
            Error::EmptyCorpus(_) => "empty_corpus",
            Error::SizeOutOfRange { .. } => "size_out_of_range",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::MissingFeature(_) => "missing_feature",
            Error::InsufficientChildren(_) => "insufficient_children",
            Error::MissingGroundTruth(_) => "missing_ground_truth",
            Error::ImageMismatch(_) => "image_mismatch",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
