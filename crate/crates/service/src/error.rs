use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use promptad_core::client::ClientError;
use promptad_core::experiment::ExperimentError;
use promptad_core::prompt::PromptError;
use promptad_core::refine::RefineError;
use serde_json::json;

/// An error with the HTTP status it maps to. The body is `{"error": message}`.
#[derive(Debug, thiserror::Error)]
#[error("{status}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<PromptError> for ApiError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::UnknownVersion(_) => ApiError::not_found(e.to_string()),
            PromptError::Io(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

impl From<ClientError> for ApiError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Config(_) | ClientError::InvalidRequest(_) => ApiError::bad_request(e.to_string()),
            _ => ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()),
        }
    }
}

impl From<RefineError> for ApiError {
    fn from(e: RefineError) -> Self {
        match e {
            RefineError::InvalidRequest(_) => ApiError::bad_request(e.to_string()),
            RefineError::MalformedOutput(_) => ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()),
            RefineError::Client(c) => c.into(),
            RefineError::Prompt(p) => p.into(),
            RefineError::UnknownProposal(_) => ApiError::not_found(e.to_string()),
            RefineError::NotApproved { .. } | RefineError::IllegalTransition { .. } | RefineError::PendingExists(_) => {
                ApiError::conflict(e.to_string())
            }
        }
    }
}

impl From<ExperimentError> for ApiError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::UnknownRun(_) => ApiError::not_found(e.to_string()),
            ExperimentError::Invalid(_) | ExperimentError::Dataset(_) => ApiError::bad_request(e.to_string()),
            ExperimentError::Prompt(p) => p.into(),
            ExperimentError::Client(c) => c.into(),
            ExperimentError::Eval(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    }
}
