use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use fittsview_core::Error;
use serde::Serialize;

#[derive(Debug, Serialize)]
struct Body {
    code: &'static str,
    message: String,
}

/// JSON error response `{code, message}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::DegeneratePolygon(_) => (StatusCode::UNPROCESSABLE_ENTITY, "degenerate_polygon"),
            Error::UnknownCategory(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_category"),
            Error::Domain(_) => (StatusCode::UNPROCESSABLE_ENTITY, "domain"),
            Error::InvalidInput(_) | Error::Json(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            Error::Integrity(_) => (StatusCode::INTERNAL_SERVER_ERROR, "integrity"),
            Error::Io { .. }
            | Error::RecordSize { .. }
            | Error::NonFinite { .. }
            | Error::Parse { .. }
            | Error::LabelCount { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "dataset"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}: {}", self.code, self.message);
        }
        (
            self.status,
            Json(Body {
                code: self.code,
                message: self.message,
            }),
        )
            .into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
