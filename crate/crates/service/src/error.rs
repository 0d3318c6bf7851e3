use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;
use solarec::recommender::RecommendError;

use crate::handlers::json_response;
use crate::snapshot::SnapshotError;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{message}")]
    BadRequest { error: &'static str, message: String },
    #[error("unknown candidate `{0}`")]
    UnknownCandidate(String),
    #[error("revision is {current}, request expected {expected}")]
    RevisionMismatch { expected: u64, current: u64 },
    #[error(transparent)]
    Domain(#[from] RecommendError),
    #[error(transparent)]
    Persist(#[from] SnapshotError),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    revision: Option<u64>,
}

impl ApiError {
    pub fn bad_request(error: &'static str, message: impl Into<String>) -> Self {
        Self::BadRequest { error, message: message.into() }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            Self::BadRequest { .. } => StatusCode::BAD_REQUEST,
            Self::UnknownCandidate(_) => StatusCode::NOT_FOUND,
            Self::RevisionMismatch { .. } => StatusCode::CONFLICT,
            Self::Domain(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Persist(_) | Self::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &str {
        match self {
            Self::BadRequest { error, .. } => error,
            Self::UnknownCandidate(_) => "UnknownCandidate",
            Self::RevisionMismatch { .. } => "RevisionMismatch",
            Self::Domain(e) => e.kind(),
            Self::Persist(_) => "SnapshotWrite",
            Self::Internal(_) => "Internal",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let revision = match &self {
            Self::RevisionMismatch { current, .. } => Some(*current),
            _ => None,
        };
        let body = ErrorBody { error: self.code(), message: self.to_string(), revision };
        json_response(self.status(), &body, None)
    }
}
