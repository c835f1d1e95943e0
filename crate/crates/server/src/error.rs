use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use flow_core::engine::EngineError;
use flow_core::model::ModelError;
use serde_json::json;

/// An error answer: `{"error": <kind>, "detail": <message>}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub detail: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, detail: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            detail: detail.into(),
        }
    }

    pub fn invalid_body(detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidBody", detail)
    }

    pub fn internal(detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({"error": self.kind, "detail": self.detail}));
        (self.status, body).into_response()
    }
}

fn engine_kind(e: &EngineError) -> &'static str {
    match e {
        EngineError::UnknownApp(_) => "UnknownApp",
        EngineError::UnknownLauncher(_) => "UnknownLauncher",
        EngineError::UnknownFlow(_) => "UnknownFlow",
        EngineError::UnknownInstance(_) => "UnknownInstance",
        EngineError::NotRunning(_) => "NotRunning",
        EngineError::StaleInstance(_) => "StaleInstance",
        EngineError::AlreadyTerminal(_) => "AlreadyTerminal",
        EngineError::InstanceMismatch { .. } => "InstanceMismatch",
        EngineError::UnknownElement(_) => "UnknownElement",
        EngineError::DuplicateElement(_) => "DuplicateElement",
        EngineError::TypeMismatch(_) => "TypeMismatch",
        EngineError::ConstraintViolation { .. } => "ConstraintViolation",
        EngineError::MissingElement(_) => "MissingElement",
        EngineError::StepFailure { .. } => "StepFailure",
        EngineError::Schema(_) => "Schema",
        EngineError::ModelVersionMissing { .. } => "ModelVersionMissing",
        EngineError::VersionConflict { .. } => "VersionConflict",
        EngineError::InvalidModel(_) => "InvalidModel",
        EngineError::Storage(_) => "StorageFailure",
    }
}

pub fn engine_status(e: &EngineError) -> StatusCode {
    match e {
        EngineError::UnknownApp(_) | EngineError::UnknownLauncher(_) | EngineError::UnknownInstance(_) => {
            StatusCode::NOT_FOUND
        }
        EngineError::NotRunning(_)
        | EngineError::StaleInstance(_)
        | EngineError::AlreadyTerminal(_)
        | EngineError::VersionConflict { .. } => StatusCode::CONFLICT,
        EngineError::InvalidModel(_) => StatusCode::UNPROCESSABLE_ENTITY,
        e if e.is_response_rejection() => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError::new(engine_status(&e), engine_kind(&e), e.to_string())
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidModel", e.to_string())
    }
}
