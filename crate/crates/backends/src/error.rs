use opnote_core::CoreError;

pub type Result<T, E = BackendError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("server answered HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("could not structure model output: {message}")]
    Structuring { message: String, raw: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl BackendError {
    /// Raw model text attached to a structuring failure.
    pub fn raw_output(&self) -> Option<&str> {
        match self {
            BackendError::Structuring { raw, .. } => Some(raw),
            _ => None,
        }
    }
}
