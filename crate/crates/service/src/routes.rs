use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use axum::body::Bytes;
use revise_core::geometry::{extract_contour, ordered_polygons, BinaryMask, Point};
use revise_core::Error;

use crate::api::*;
use crate::session::Session;
use crate::AppState;

/// An error response with a stable machine-readable code.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no live session {id:?}"))
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        if r.status() == StatusCode::PAYLOAD_TOO_LARGE {
            Self::new(StatusCode::PAYLOAD_TOO_LARGE, "payload_too_large", r.body_text())
        } else {
            Self::bad_request("malformed_payload", r.body_text())
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::OutOfBounds { .. } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "click_out_of_bounds", e.to_string()),
            Error::ShapeMismatch { .. } => Self::bad_request("shape_mismatch", e.to_string()),
            Error::InvalidConfig(_) | Error::Parse(_) => Self::bad_request("invalid_payload", e.to_string()),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            v: API_VERSION,
            error: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn contour(mask: &BinaryMask) -> Vec<Vec<Point>> {
    ordered_polygons(&extract_contour(mask))
}

fn check_version(v: u32) -> ApiResult<()> {
    if v == API_VERSION {
        Ok(())
    } else {
        Err(ApiError::bad_request(
            "unsupported_version",
            format!("expected \"v\": {API_VERSION}, got {v}"),
        ))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/clicks", post(apply_click))
        .route("/sessions/{id}/undo", post(undo))
        .layer(DefaultBodyLimit::max(state.body_limit()))
        .with_state(state)
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let model = state.model();
    Json(Health {
        v: API_VERSION,
        status: "ok".into(),
        sessions: state.session_count(),
        model: ModelInfo {
            parameters: model.net.parameter_count(),
            input_size: model.net.config().input_size,
            source: model.source.clone(),
        },
    })
}

fn revision(session: &Session, timing: Option<Timing>) -> RevisionResponse {
    RevisionResponse {
        v: API_VERSION,
        session_id: session.id.clone(),
        revision: session.history.len(),
        contour: contour(&session.current_mask),
        mask: session.current_mask.to_rle(),
        clicks: session.clicks.clone(),
        timing,
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<CreateSessionResponse>)> {
    let Json(req) = body?;
    check_version(req.v)?;
    let size = state.model().net.config().input_size;
    let img = &req.image;
    if (img.height, img.width) != (size, size) {
        return Err(Error::ShapeMismatch {
            expected: (size, size),
            got: (img.height, img.width),
        }
        .into());
    }
    if img.values.len() != size * size {
        return Err(ApiError::bad_request(
            "shape_mismatch",
            format!("expected {} image values, got {}", size * size, img.values.len()),
        ));
    }
    if !img.values.iter().all(|v| (0.0..=1.0).contains(v)) {
        return Err(ApiError::bad_request("invalid_payload", "image values must lie in [0, 1]"));
    }
    if (req.initial_mask.height, req.initial_mask.width) != (size, size) {
        return Err(Error::ShapeMismatch {
            expected: (size, size),
            got: (req.initial_mask.height, req.initial_mask.width),
        }
        .into());
    }
    let mask: BinaryMask = req
        .initial_mask
        .decode()
        .map_err(|e| ApiError::bad_request("invalid_mask", e.to_string()))?;

    state.purge_expired();
    let id = uuid::Uuid::new_v4().simple().to_string();
    let response = CreateSessionResponse {
        v: API_VERSION,
        session_id: id.clone(),
        contour: contour(&mask),
        mask: mask.to_rle(),
        empty_mask: mask.is_empty(),
    };
    state.insert(Session::new(id, size, req.image.values, mask, req.window));
    Ok((StatusCode::CREATED, Json(response)))
}

async fn apply_click(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ClickRequest>, JsonRejection>,
) -> ApiResult<Json<RevisionResponse>> {
    let session = state.lookup(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let Json(req) = body?;
    check_version(req.v)?;
    // Waiters on one session are queued in arrival order.
    let mut guard = session.lock_owned().await;
    let model = state.model();
    let (guard, timing) = tokio::task::spawn_blocking(move || {
        let timing = guard.apply_click(&model.net, req.row, req.col);
        (guard, timing)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    let timing = timing?;
    log::info!(
        "session {id} click {}: model {:.1} ms, encode {:.1} ms",
        guard.clicks.len(),
        timing.model_ms,
        timing.encode_ms
    );
    Ok(Json(revision(&guard, Some(timing))))
}

async fn undo(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<RevisionResponse>> {
    let session = state.lookup(&id).ok_or_else(|| ApiError::not_found(&id))?;
    // The body is optional; when present it must be a versioned object.
    if !body.iter().all(u8::is_ascii_whitespace) {
        let req: UndoRequest =
            serde_json::from_slice(&body).map_err(|e| ApiError::bad_request("malformed_payload", e.to_string()))?;
        check_version(req.v)?;
    }
    let mut guard = session.lock().await;
    if !guard.undo() {
        return Err(ApiError::new(StatusCode::CONFLICT, "nothing_to_undo", "no revision to undo"));
    }
    Ok(Json(revision(&guard, None)))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionSnapshot>> {
    let session = state.lookup(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let s = session.lock().await;
    Ok(Json(SessionSnapshot {
        v: API_VERSION,
        session_id: s.id.clone(),
        size: s.size,
        window: s.window,
        contour: contour(&s.current_mask),
        mask: s.current_mask.to_rle(),
        clicks: s.clicks.clone(),
        history: s.history.iter().map(BinaryMask::to_rle).collect(),
        created_unix_ms: s.created_unix_ms,
        updated_unix_ms: s.updated_unix_ms,
    }))
}
