//! JSON HTTP API over [`ComposeService`].
//!
//! Every error response has the shape
//! `{"error": {"code": "...", "message": "...", "details": ...}}` where
//! `code` is the stable [`Error::code`] of the underlying failure.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use personamail_core::domain::{AnchorId, AnchorKind, EditId, FactorSelection, IntentId, RecordId, SessionId, Span, TaskContext};
use personamail_core::service::ComposeService;
use personamail_core::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

/// HTTP status used for each error code.
pub fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::Validation { .. } | Error::NoOpEdit => StatusCode::BAD_REQUEST,
        Error::NotFound { .. } => StatusCode::NOT_FOUND,
        Error::State { .. } => StatusCode::CONFLICT,
        Error::Gateway(_) | Error::Schema { .. } | Error::Scope { .. } | Error::Segmentation(_) => StatusCode::BAD_GATEWAY,
        Error::Storage(_) | Error::Config(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let details = match &err {
            Error::Validation { report: Some(r), .. } => serde_json::to_value(r).unwrap_or(Value::Null),
            Error::Schema { agent, attempts, .. } => json!({ "agent": agent, "attempts": attempts }),
            Error::Scope { unit_ids } => json!({ "unit_ids": unit_ids }),
            Error::NotFound { kind, id } => json!({ "kind": kind, "id": id }),
            Error::State { operation, state } => json!({ "operation": operation, "state": state }),
            _ => Value::Null,
        };
        ApiError {
            status: status_for(&err).as_u16(),
            code: err.code().to_owned(),
            message: err.to_string(),
            details,
        }
    }
}

impl ApiError {
    fn bad_request(message: String) -> Self {
        ApiError {
            status: 400,
            code: "validation_error".into(),
            message,
            details: Value::Null,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(json!({ "error": self }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Svc = State<Arc<ComposeService>>;

/// Parse a JSON body ourselves so malformed input uses the common error shape.
fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Run blocking service work off the async executor.
async fn blocking<T, F>(service: Arc<ComposeService>, f: F) -> ApiResult<Json<T>>
where
    T: Send + 'static,
    F: FnOnce(&ComposeService) -> personamail_core::Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&service)).await {
        Ok(result) => result.map(Json).map_err(ApiError::from),
        Err(e) => Err(ApiError {
            status: 500,
            code: "internal_error".into(),
            message: e.to_string(),
            details: Value::Null,
        }),
    }
}

#[derive(Deserialize)]
struct Selections {
    selections: Vec<FactorSelection>,
}

#[derive(Deserialize)]
struct NewValue {
    new_value: String,
}

#[derive(Deserialize)]
struct SpanBody {
    span: Span,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
struct QuickFixBody {
    record_id: RecordId,
    span: Span,
    #[serde(default = "yes")]
    accept: bool,
}

#[derive(Deserialize)]
struct EditBody {
    span: Span,
    new_text: String,
    #[serde(default)]
    rationale: Option<String>,
}

#[derive(Deserialize)]
struct RationaleBody {
    #[serde(default)]
    rationale: Option<String>,
}

#[derive(Deserialize)]
struct SaveAnchorBody {
    kind: AnchorKind,
    #[serde(default)]
    name: Option<String>,
}

#[derive(Deserialize)]
struct RenameBody {
    name: String,
}

async fn create_session(State(s): Svc, body: Bytes) -> ApiResult<impl IntoResponse> {
    let task: TaskContext = parse(&body)?;
    let view = blocking(s, move |svc| svc.create_session(task)).await?;
    Ok((StatusCode::CREATED, view))
}

async fn get_session(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    blocking(s, move |svc| svc.get_session(&SessionId::new(id))).await
}

async fn session_events(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    blocking(s, move |svc| svc.events(&SessionId::new(id))).await
}

async fn session_summary(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    blocking(s, move |svc| svc.summary(&SessionId::new(id))).await
}

async fn apply_anchor(State(s): Svc, Path((id, anchor)): Path<(String, String)>) -> ApiResult<impl IntoResponse> {
    blocking(s, move |svc| svc.apply_anchor(&SessionId::new(id), &AnchorId::new(anchor))).await
}

async fn submit_factors(State(s): Svc, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: Selections = parse(&body)?;
    blocking(s, move |svc| svc.submit_factors(&SessionId::new(id), b.selections)).await
}

async fn generate(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    blocking(s, move |svc| svc.generate(&SessionId::new(id))).await
}

async fn preview_intent(State(s): Svc, Path((id, intent)): Path<(String, String)>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: NewValue = parse(&body)?;
    blocking(s, move |svc| svc.preview_intent(&SessionId::new(id), &IntentId::new(intent), &b.new_value)).await
}

async fn apply_intent(State(s): Svc, Path((id, intent)): Path<(String, String)>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: NewValue = parse(&body)?;
    blocking(s, move |svc| svc.apply_intent(&SessionId::new(id), &IntentId::new(intent), &b.new_value)).await
}

async fn discard_preview(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    blocking(s, move |svc| svc.discard_preview(&SessionId::new(id)))
        .await
        .map(|_| StatusCode::NO_CONTENT)
}

async fn query_quickfix(State(s): Svc, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: SpanBody = parse(&body)?;
    blocking(s, move |svc| svc.query_quickfix(&SessionId::new(id), b.span)).await
}

async fn apply_quickfix(State(s): Svc, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: QuickFixBody = parse(&body)?;
    blocking(s, move |svc| svc.apply_quickfix(&SessionId::new(id), &b.record_id, b.span, b.accept)).await
}

async fn undo_quickfix(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    blocking(s, move |svc| svc.undo_quickfix(&SessionId::new(id))).await
}

async fn manual_edit(State(s): Svc, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: EditBody = parse(&body)?;
    blocking(s, move |svc| svc.manual_edit(&SessionId::new(id), b.span, &b.new_text, b.rationale)).await
}

async fn provide_rationale(State(s): Svc, Path((id, edit)): Path<(String, String)>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: RationaleBody = parse(&body)?;
    blocking(s, move |svc| svc.provide_rationale(&SessionId::new(id), &EditId::new(edit), b.rationale)).await
}

async fn save_anchor(State(s): Svc, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: SaveAnchorBody = parse(&body)?;
    let anchor = blocking(s, move |svc| svc.save_anchor(&SessionId::new(id), b.kind, b.name)).await?;
    Ok((StatusCode::CREATED, anchor))
}

async fn finalize(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    blocking(s, move |svc| svc.finalize(&SessionId::new(id))).await
}

async fn list_anchors(State(s): Svc) -> ApiResult<impl IntoResponse> {
    blocking(s, |svc| Ok(svc.store().list_anchors())).await
}

async fn rename_anchor(State(s): Svc, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: RenameBody = parse(&body)?;
    blocking(s, move |svc| svc.store().rename_anchor(&AnchorId::new(id), &b.name)).await
}

async fn delete_anchor(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    blocking(s, move |svc| {
        let anchor = AnchorId::new(id);
        if svc.store().delete_anchor(&anchor)? {
            Ok(())
        } else {
            Err(Error::not_found("anchor", anchor.0))
        }
    })
    .await
    .map(|_| StatusCode::NO_CONTENT)
}

async fn list_records(State(s): Svc) -> ApiResult<impl IntoResponse> {
    blocking(s, |svc| Ok(svc.store().list_records())).await
}

async fn delete_record(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    blocking(s, move |svc| {
        let record = RecordId::new(id);
        if svc.store().delete_record(&record)? {
            Ok(())
        } else {
            Err(Error::not_found("record", record.0))
        }
    })
    .await
    .map(|_| StatusCode::NO_CONTENT)
}

async fn catalog(State(s): Svc) -> ApiResult<impl IntoResponse> {
    blocking(s, |svc| Ok(svc.catalog().clone())).await
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn fallback() -> ApiError {
    ApiError {
        status: 404,
        code: "not_found".into(),
        message: "no such route".into(),
        details: Value::Null,
    }
}

pub fn router(service: Arc<ComposeService>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/catalog", get(catalog))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/events", get(session_events))
        .route("/sessions/{id}/summary", get(session_summary))
        .route("/sessions/{id}/anchor/{anchor_id}", post(apply_anchor))
        .route("/sessions/{id}/factors", post(submit_factors))
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/intents/{intent_id}/preview", post(preview_intent))
        .route("/sessions/{id}/intents/{intent_id}/apply", post(apply_intent))
        .route("/sessions/{id}/preview", delete(discard_preview))
        .route("/sessions/{id}/quickfix/query", post(query_quickfix))
        .route("/sessions/{id}/quickfix/apply", post(apply_quickfix))
        .route("/sessions/{id}/quickfix/undo", post(undo_quickfix))
        .route("/sessions/{id}/edits", post(manual_edit))
        .route("/sessions/{id}/edits/{edit_id}/rationale", post(provide_rationale))
        .route("/sessions/{id}/anchors", post(save_anchor))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/anchors", get(list_anchors))
        .route("/anchors/{id}", patch(rename_anchor).delete(delete_anchor))
        .route("/stylebook", get(list_records))
        .route("/stylebook/{id}", delete(delete_record))
        .fallback(fallback)
        .with_state(service)
}

/// Serve the API until the process is stopped.
pub async fn serve(service: Arc<ComposeService>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(service)).await
}
