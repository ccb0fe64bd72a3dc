use thiserror::Error;

/// A key-level problem found while decoding a record from JSON.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaIssue {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for SchemaIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("unknown tag code {0:?}")]
    UnknownTag(String),

    #[error("invalid label {0:?}")]
    InvalidLabel(String),

    #[error("invalid transcript: {0}")]
    InvalidTranscript(String),

    #[error("invalid span: {0}")]
    InvalidSpan(String),

    #[error("invalid label sequence: {0}")]
    InvalidLabels(String),

    #[error("span {tag} [{start}, {end}) does not align with token boundaries")]
    Alignment { tag: String, start: usize, end: usize },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("record schema error: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Schema(Vec<SchemaIssue>),

    #[error("language pack error: {0}")]
    Pack(String),

    #[error("mapping table error: {0}")]
    Mapping(String),

    #[error("evaluation input misaligned: {0}")]
    EvalAlignment(String),

    #[error("nothing to average: no tag has gold support")]
    EmptyMacro,

    #[error("unknown format {0:?}")]
    Format(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("invalid generator profile: {0}")]
    Profile(String),

    #[error("asset error: {0}")]
    Asset(String),

    #[error("parser precondition violated: {0}")]
    EmptySurface(&'static str),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
