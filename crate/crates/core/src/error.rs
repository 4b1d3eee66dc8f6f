use std::path::PathBuf;

use crate::corpus::{Relation, ValidityLabel};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by the stage that raises them; [`Error::category`]
/// folds them into the coarse classes used for process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // ingestion
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("unknown relation column `{0}`")]
    UnknownRelation(String),
    #[error("record {index} is missing field `{field}`")]
    MissingField { index: usize, field: &'static str },
    #[error("invalid event text: {0}")]
    InvalidEvent(String),

    // negation
    #[error("cannot negate event `{0}`: no verb found")]
    UnnegatableEvent(String),
    #[error("event `{0}` is already negated")]
    AlreadyNegated(String),
    #[error("triple {0} is not an original triple")]
    NotAnOriginal(String),
    #[error("generated rewrite `{rewrite}` rejected for `{original}`")]
    RewriteRejected { original: String, rewrite: String },

    // llm client
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    BackendUnavailable { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("unbound template placeholder `{0}`")]
    TemplateError(String),
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),

    // judge
    #[error("shortfall for {relation}: need {needed}, have {available}")]
    Shortfall {
        relation: String,
        needed: usize,
        available: usize,
    },
    #[error("no collision-free recombination for {relation} after {attempts} attempts")]
    RecombinationExhausted { relation: Relation, attempts: usize },
    #[error("generation rejected for `{event}` after {attempts} attempts")]
    GenerationRejected { event: String, attempts: usize },
    #[error("unparseable verdict: `{0}`")]
    UnparseableVerdict(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("empty input")]
    EmptyInput,
    #[error("training and benchmark data overlap on {0} id(s)")]
    Overlap(usize),

    // corpus builder
    #[error("labeling aborted: {quarantined} of {total} triples quarantined (limit {limit})")]
    LabelingAborted {
        quarantined: usize,
        total: usize,
        limit: usize,
    },
    #[error("group {0} is missing a required slot")]
    IncompleteGroup(String),
    #[error("export rejected: triple {id} is labeled {label}")]
    ExportRejected { id: String, label: ValidityLabel },

    // annotation
    #[error("session error: {0}")]
    SessionError(String),
    #[error("validation error: {0}")]
    ValidationError(String),
    #[error("no co-labeled items between `{0}` and `{1}`")]
    EmptyOverlap(String, String),
    #[error("incomplete annotation: {0}")]
    IncompleteAnnotation(String),

    // evaluation
    #[error("duplicate prediction for instance `{0}`")]
    DuplicatePrediction(String),
    #[error("prediction sets do not cover the same instances: {0}")]
    CoverageError(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Coarse failure class of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Data,
    Backend,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::BackendUnavailable { .. } | Error::ProtocolError(_) => ErrorCategory::Backend,
            _ => ErrorCategory::Data,
        }
    }

    /// Stable variant name, used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::MalformedRow { .. } => "MalformedRow",
            Error::UnknownRelation(_) => "UnknownRelation",
            Error::MissingField { .. } => "MissingField",
            Error::InvalidEvent(_) => "InvalidEvent",
            Error::UnnegatableEvent(_) => "UnnegatableEvent",
            Error::AlreadyNegated(_) => "AlreadyNegated",
            Error::NotAnOriginal(_) => "NotAnOriginal",
            Error::RewriteRejected { .. } => "RewriteRejected",
            Error::BackendUnavailable { .. } => "BackendUnavailable",
            Error::ProtocolError(_) => "ProtocolError",
            Error::TemplateError(_) => "TemplateError",
            Error::InvalidRequest(_) => "InvalidRequest",
            Error::Shortfall { .. } => "ShortfallError",
            Error::RecombinationExhausted { .. } => "RecombinationExhausted",
            Error::GenerationRejected { .. } => "GenerationRejected",
            Error::UnparseableVerdict(_) => "UnparseableVerdict",
            Error::UnknownInstance(_) => "UnknownInstance",
            Error::EmptyInput => "EmptyInput",
            Error::Overlap(_) => "Overlap",
            Error::LabelingAborted { .. } => "LabelingAborted",
            Error::IncompleteGroup(_) => "IncompleteGroup",
            Error::ExportRejected { .. } => "ExportRejected",
            Error::SessionError(_) => "SessionError",
            Error::ValidationError(_) => "ValidationError",
            Error::EmptyOverlap(..) => "EmptyOverlap",
            Error::IncompleteAnnotation(_) => "IncompleteAnnotation",
            Error::DuplicatePrediction(_) => "DuplicatePrediction",
            Error::CoverageError(_) => "CoverageError",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}
