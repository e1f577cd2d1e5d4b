//! HTTP API for the annotation service.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sumleak_core::anno::{
    Adjudication, AnnoError, Annotation, CreateSession, DistributionView, Phase, Question, Session, SessionEvent,
};

use crate::store::{AnnoStore, StoreError};

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::UnknownSession(_) => StatusCode::NOT_FOUND,
            StoreError::Exists(_) => StatusCode::CONFLICT,
            StoreError::BadId(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::Anno(a) => match a {
                AnnoError::UnknownAnnotator(_) | AnnoError::UnknownPair(_) => StatusCode::NOT_FOUND,
                AnnoError::Duplicate { .. }
                | AnnoError::Closed
                | AnnoError::Incomplete
                | AnnoError::NotDisputed(_) => StatusCode::CONFLICT,
                AnnoError::NotAdjudicator(_) => StatusCode::FORBIDDEN,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            },
            StoreError::Io(_) | StoreError::Corrupt { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = Arc<AnnoStore>;

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn question(q: &Option<String>) -> ApiResult<Question> {
    let raw = q.as_deref().ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, "missing q".into()))?;
    Question::parse(raw).ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, format!("unknown question `{raw}`")))
}

/// Appends on a blocking thread, since the log is fsynced.
async fn append(store: Shared, id: String, event: SessionEvent) -> ApiResult<Arc<Session>> {
    tokio::task::spawn_blocking(move || store.append(&id, event))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
struct CreateBody {
    #[serde(default)]
    id: Option<String>,
    #[serde(flatten)]
    request: CreateSession,
}

#[derive(Serialize)]
struct SessionStatus {
    id: String,
    phase: Phase,
    pairs: usize,
    calibration_pairs: usize,
    annotators: [String; 2],
    adjudicator: String,
    annotations: usize,
    adjudications: usize,
}

fn status(s: &Session) -> SessionStatus {
    SessionStatus {
        id: s.id.clone(),
        phase: s.phase(),
        pairs: s.pairs.len(),
        calibration_pairs: s.calibration_pair_count,
        annotators: s.annotators.clone(),
        adjudicator: s.adjudicator.clone(),
        annotations: s.annotations.len(),
        adjudications: s.adjudications.len(),
    }
}

async fn create(State(store): State<Shared>, Json(body): Json<CreateBody>) -> ApiResult<impl IntoResponse> {
    let s = tokio::task::spawn_blocking(move || store.create(body.id, body.request))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((StatusCode::CREATED, Json(status(&s))))
}

async fn list(State(store): State<Shared>) -> Json<Vec<String>> {
    Json(store.ids())
}

async fn show(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<SessionStatus>> {
    let s = store.get(&id)?;
    Ok(Json(status(&s)))
}

#[derive(Deserialize)]
struct AnnotatorQuery {
    annotator: String,
}

async fn next(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<AnnotatorQuery>,
) -> ApiResult<impl IntoResponse> {
    let s = store.get(&id)?;
    Ok(Json(s.next_task(&q.annotator).map_err(StoreError::from)?))
}

async fn annotate(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Json(mut a): Json<Annotation>,
) -> ApiResult<impl IntoResponse> {
    a.timestamp = now_ms();
    let key = json!({ "pair_id": a.pair_id, "annotator": a.annotator, "status": "stored" });
    append(store, id, SessionEvent::Annotated(a)).await?;
    Ok((StatusCode::CREATED, Json(key)))
}

async fn adjudicate(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Json(mut a): Json<Adjudication>,
) -> ApiResult<impl IntoResponse> {
    a.timestamp = now_ms();
    let key = json!({ "pair_id": a.pair_id, "question": a.question, "status": "stored" });
    append(store, id, SessionEvent::Adjudicated(a)).await?;
    Ok((StatusCode::CREATED, Json(key)))
}

async fn adjudications(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Vec<Adjudication>>> {
    Ok(Json(store.get(&id)?.adjudications.clone()))
}

#[derive(Deserialize)]
struct QuestionQuery {
    q: Option<String>,
    #[serde(default)]
    view: Option<DistributionView>,
}

async fn disagreements(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<QuestionQuery>,
) -> ApiResult<impl IntoResponse> {
    let question = question(&q.q)?;
    let ids = store.get(&id)?.disagreements(question).map_err(StoreError::from)?;
    Ok(Json(json!({ "question": question, "pair_ids": ids })))
}

async fn agreement(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<QuestionQuery>,
) -> ApiResult<impl IntoResponse> {
    let question = question(&q.q)?;
    let s = store.get(&id)?;
    let kappa = s.agreement(question).map_err(StoreError::from)?;
    let pairs = s.pairs.iter().filter(|p| !p.calibration).count();
    Ok(Json(json!({ "question": question, "kappa": kappa, "pairs": pairs })))
}

async fn distribution(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<QuestionQuery>,
) -> ApiResult<impl IntoResponse> {
    let question = question(&q.q)?;
    let view = q.view.unwrap_or(DistributionView::Adjudicated);
    let counts = store.get(&id)?.distribution(question, view).map_err(StoreError::from)?;
    Ok(Json(json!({ "question": question, "view": view, "counts": counts })))
}

/// Every annotation, then every adjudication, one JSON record per line.
async fn export(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let s = store.get(&id)?;
    let mut body = String::new();
    for a in &s.annotations {
        let mut v = serde_json::to_value(a).expect("serializable");
        v["record"] = json!("annotation");
        body.push_str(&v.to_string());
        body.push('\n');
    }
    for a in &s.adjudications {
        let mut v = serde_json::to_value(a).expect("serializable");
        v["record"] = json!("adjudication");
        body.push_str(&v.to_string());
        body.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body))
}

async fn close(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let s = append(store, id, SessionEvent::Closed).await?;
    Ok(Json(status(&s)))
}

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/annotations", post(annotate))
        .route("/sessions/{id}/adjudications", post(adjudicate).get(adjudications))
        .route("/sessions/{id}/disagreements", get(disagreements))
        .route("/sessions/{id}/agreement", get(agreement))
        .route("/sessions/{id}/distribution", get(distribution))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/close", post(close))
        .with_state(store)
}

pub async fn serve(store: Shared, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}

/// A server running on its own runtime thread; stops when dropped.
pub struct Running {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Running {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn spawn(store: Shared, addr: SocketAddr) -> std::io::Result<Running> {
    let std_listener = std::net::TcpListener::bind(addr)?;
    std_listener.set_nonblocking(true)?;
    let addr = std_listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().expect("runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
            let _ = axum::serve(listener, router(store))
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(Running { addr, shutdown: Some(tx), thread: Some(thread) })
}
