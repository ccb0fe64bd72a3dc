use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use opnote_backends::{BackendError, ExtractError};
use opnote_core::CoreError;
use serde_json::{json, Map, Value};

use crate::store::StoreError;

/// An error response: status plus a JSON body with at least `error`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Map<String, Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        let mut body = Map::new();
        body.insert("error".into(), Value::String(message.into()));
        Self { status, body }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.body.insert(key.into(), value.into());
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(Value::Object(self.body))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => ApiError::not_found(e.to_string()),
            StoreError::Conflict { current, .. } => {
                ApiError::new(StatusCode::CONFLICT, e.to_string()).with("current_version", current)
            }
            StoreError::Exists(_) => ApiError::new(StatusCode::CONFLICT, e.to_string()),
            StoreError::Io(_) | StoreError::Corrupt { .. } => {
                tracing::error!(error = %e, "storage failure");
                ApiError::internal("storage failure")
            }
        }
    }
}

/// Schema and validation problems become 422 with a `problems` list.
impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::Schema(issues) => {
                let problems: Vec<Value> = issues.iter().map(|i| json!({"key": i.key, "message": i.message})).collect();
                ApiError::unprocessable("record does not match the schema").with("problems", problems)
            }
            CoreError::Io(_) => ApiError::internal(e.to_string()),
            _ => ApiError::unprocessable(e.to_string()),
        }
    }
}

impl From<ExtractError> for ApiError {
    fn from(e: ExtractError) -> Self {
        let stage = e.stage.name();
        let err = match &e.error {
            BackendError::Timeout { .. }
            | BackendError::Transport { .. }
            | BackendError::Status { .. }
            | BackendError::Protocol(_) => ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()),
            BackendError::Structuring { raw, .. } => {
                ApiError::unprocessable(e.to_string()).with("raw_output", raw.clone())
            }
            BackendError::Config(_) | BackendError::MissingApiKey(_) => {
                tracing::error!(error = %e, "backend misconfigured");
                ApiError::internal(e.to_string())
            }
            BackendError::Precondition(_) | BackendError::Core(_) => ApiError::unprocessable(e.to_string()),
        };
        err.with("stage", stage)
    }
}
