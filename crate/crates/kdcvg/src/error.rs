use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to name the
/// offending record, line, or dimension in CLI output.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),

    #[error("line {line}: malformed record: {source}")]
    MalformedLine {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("record {id:?}: missing structured script")]
    MissingScript { id: String },

    #[error("record {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("external embedder cannot embed new text; supply vectors in the input")]
    ExternalEmbedder,

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("empty reference corpus")]
    EmptyCorpus,

    #[error("incompatible file version: expected {expected:?}, found {found:?}")]
    VersionMismatch { expected: String, found: String },

    #[error("script parse failure: no {component} segment identified")]
    MissingComponent { component: &'static str },

    #[error("LLM client error: {0}")]
    Llm(String),

    #[error("selection size {k} exceeds candidate count {n}")]
    SelectionTooLarge { k: usize, n: usize },

    #[error("non-finite value encountered during {0}; aborting")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("trajectory needs at least {min} frames, got {got}")]
    TooFewFrames { min: usize, got: usize },

    #[error("{0}")]
    Metric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
