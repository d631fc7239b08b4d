use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use woundpatch::pipeline::PipelineError;
use woundpatch::segmentation::SegmentationError;

use crate::wire::ErrorBody;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, stage: &str, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                stage: stage.into(),
                code: code.into(),
                message: message.into(),
            },
        }
    }

    pub fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "session", "not_found", format!("{what} not found"))
    }

    pub fn bad_request(stage: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, stage, "bad_request", message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "session", code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "service", "internal", message)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::Cancelled => StatusCode::SERVICE_UNAVAILABLE,
            PipelineError::MissingScore => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.stage(), &e.code(), e.to_string())
    }
}

impl From<SegmentationError> for ApiError {
    fn from(e: SegmentationError) -> Self {
        PipelineError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
