//! HTTP front of the job store.
//!
//! | route | caller | |
//! |---|---|---|
//! | `POST /jobs` | user | submit a [`JobRequest`] |
//! | `GET /jobs/{id}` | user | status document |
//! | `GET /jobs/{id}/result` | user | payload, raw or base64 in JSON |
//! | `POST /worker/poll` | worker | claim the oldest queued job |
//! | `POST /worker/result/{id}` | worker | upload the outcome of a claim |
//!
//! Worker routes require `Authorization: Bearer <token>`.

use std::future::Future;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::job::{Failure, JobRequest, JobStatus, JobView, Rejection, ResultFormat};
use crate::store::{JobStore, Outcome, StoreError};

/// Largest accepted request body. A result upload carries every capture of
/// a job, base64 encoded.
pub const MAX_BODY_BYTES: usize = 512 << 20;

/// Shared broker state.
pub struct Broker {
    store: Mutex<JobStore>,
    worker_token: String,
    compact_every: usize,
}

impl Broker {
    pub fn new(store: JobStore, worker_token: impl Into<String>, compact_every: usize) -> Arc<Self> {
        Arc::new(Self {
            store: Mutex::new(store),
            worker_token: worker_token.into(),
            compact_every,
        })
    }

    /// The store, for inspection; the broker's own handlers hold this lock
    /// for the whole of each mutation.
    pub fn store(&self) -> MutexGuard<'_, JobStore> {
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn maybe_compact(&self, store: &mut JobStore) {
        if self.compact_every > 0 && store.appended_since_compaction() >= self.compact_every {
            let _ = store.compact();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub id: String,
    pub status: JobStatus,
}

/// A claimed job as handed to a worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: String,
    pub claim_token: String,
    pub lease_expires_at_ms: u64,
    pub attempt: u32,
    pub request: JobRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Upload {
    /// `data` is base64.
    Done { data: String },
    Failed { reason: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadRequest {
    pub claim_token: String,
    #[serde(flatten)]
    pub outcome: Upload,
}

/// JSON envelope for a fetched result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub id: String,
    pub format: ResultFormat,
    pub encoding: String,
    pub data: String,
}

impl ResultEnvelope {
    pub fn decode(&self) -> Result<Vec<u8>, base64::DecodeError> {
        B64.decode(&self.data)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<JobStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

fn error(code: StatusCode, body: ErrorBody) -> Response {
    (code, Json(body)).into_response()
}

fn simple(code: StatusCode, kind: &str, message: impl Into<String>) -> Response {
    error(
        code,
        ErrorBody {
            error: kind.into(),
            message: message.into(),
            ..Default::default()
        },
    )
}

fn store_error(e: StoreError) -> Response {
    match e {
        StoreError::NotFound(id) => simple(StatusCode::NOT_FOUND, "not-found", format!("no job with id {id}")),
        StoreError::StaleClaim(id) => simple(
            StatusCode::CONFLICT,
            "stale-claim",
            format!("claim on job {id} is no longer current"),
        ),
        StoreError::WrongState { id, status } => error(
            StatusCode::CONFLICT,
            ErrorBody {
                error: "not-done".into(),
                message: format!("job {id} is {status:?}"),
                status: Some(status),
                ..Default::default()
            },
        ),
        e => simple(StatusCode::INTERNAL_SERVER_ERROR, "store", e.to_string()),
    }
}

fn rejection(r: Rejection) -> Response {
    match r {
        Rejection::Schema { path, message } => error(
            StatusCode::BAD_REQUEST,
            ErrorBody {
                error: "schema".into(),
                message,
                path: Some(path),
                ..Default::default()
            },
        ),
        Rejection::Timing { clashes } => {
            let mut indices: Vec<usize> = clashes.iter().flat_map(|c| [c.previous, c.index]).collect();
            indices.sort_unstable();
            indices.dedup();
            let c = &clashes[0];
            error(
                StatusCode::BAD_REQUEST,
                ErrorBody {
                    error: "retrigger-violation".into(),
                    message: format!(
                        "triggers {} and {} on board {} are {:.3e} s apart; the minimum re-trigger interval is {:.3e} s",
                        c.previous, c.index, c.board, c.interval_s, c.min_s
                    ),
                    path: Some("trigger_timings".into()),
                    indices,
                    ..Default::default()
                },
            )
        }
    }
}

fn authorized(broker: &Broker, headers: &HeaderMap) -> bool {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| t == broker.worker_token)
}

async fn submit(State(broker): State<Arc<Broker>>, body: Bytes) -> Response {
    let request = match JobRequest::parse(&body) {
        Ok(r) => r,
        Err(r) => return rejection(r),
    };
    let mut store = broker.store();
    match store.submit(request) {
        Ok(s) => {
            let status = store.get(&s.id).map(|j| j.status).unwrap_or(JobStatus::Queued);
            broker.maybe_compact(&mut store);
            let code = if s.created { StatusCode::CREATED } else { StatusCode::OK };
            (code, Json(SubmitResponse { id: s.id, status })).into_response()
        }
        Err(e) => store_error(e),
    }
}

async fn status(State(broker): State<Arc<Broker>>, Path(id): Path<String>) -> Response {
    match broker.store().get(&id) {
        Some(j) => Json(JobView::from(j)).into_response(),
        None => store_error(StoreError::NotFound(id)),
    }
}

fn wants_raw(headers: &HeaderMap) -> bool {
    headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|a| a.contains("application/octet-stream") || a.contains("text/csv"))
}

async fn fetch(State(broker): State<Arc<Broker>>, Path(id): Path<String>, headers: HeaderMap) -> Response {
    let store = broker.store();
    let Some(job) = store.get(&id) else {
        return store_error(StoreError::NotFound(id));
    };
    if job.status != JobStatus::Done {
        return error(
            StatusCode::CONFLICT,
            ErrorBody {
                error: "not-done".into(),
                message: format!("job {id} is {:?}", job.status),
                status: Some(job.status),
                failure: job.failure.clone(),
                ..Default::default()
            },
        );
    }
    let format = job.request.format;
    let bytes = match store.result(&id) {
        Ok(b) => b,
        Err(e) => return store_error(e),
    };
    if wants_raw(&headers) {
        ([(header::CONTENT_TYPE, format.content_type())], bytes).into_response()
    } else {
        Json(ResultEnvelope {
            id,
            format,
            encoding: "base64".into(),
            data: B64.encode(bytes),
        })
        .into_response()
    }
}

async fn poll(State(broker): State<Arc<Broker>>, headers: HeaderMap) -> Response {
    if !authorized(&broker, &headers) {
        return simple(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong worker token");
    }
    let mut store = broker.store();
    let claimed = store.claim_next();
    broker.maybe_compact(&mut store);
    match claimed {
        Ok(Some(job)) => {
            let claim = job.claim.expect("claimed jobs carry a lease");
            Json(Assignment {
                id: job.id,
                claim_token: claim.token,
                lease_expires_at_ms: claim.expires_at_ms,
                attempt: job.attempts,
                request: job.request,
            })
            .into_response()
        }
        Ok(None) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => store_error(e),
    }
}

async fn upload(
    State(broker): State<Arc<Broker>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    if !authorized(&broker, &headers) {
        return simple(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong worker token");
    }
    let req: UploadRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return simple(StatusCode::BAD_REQUEST, "schema", e.to_string()),
    };
    let outcome = match req.outcome {
        Upload::Done { data } => match B64.decode(data) {
            Ok(bytes) => Outcome::Done(bytes),
            Err(e) => return simple(StatusCode::BAD_REQUEST, "schema", format!("data is not base64: {e}")),
        },
        Upload::Failed { reason, message } => Outcome::Failed(Failure { reason, message }),
    };
    let mut store = broker.store();
    let res = store.complete(&id, &req.claim_token, outcome).map(JobView::from);
    broker.maybe_compact(&mut store);
    match res {
        Ok(view) => Json(view).into_response(),
        Err(e) => store_error(e),
    }
}

pub fn router(broker: Arc<Broker>) -> Router {
    Router::new()
        .route("/jobs", post(submit))
        .route("/jobs/{id}", get(status))
        .route("/jobs/{id}/result", get(fetch))
        .route("/worker/poll", post(poll))
        .route("/worker/result/{id}", post(upload))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(broker)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    broker: Arc<Broker>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(broker)).with_graceful_shutdown(shutdown).await
}
