//! HTTP facade over an index snapshot.
//!
//! | method | path             | body                | reply                         |
//! |--------|------------------|---------------------|-------------------------------|
//! | POST   | `/query`         | [`QueryRequest`]    | [`QueryResponse`]             |
//! | POST   | `/export`        | [`QueryRequest`]    | TSV stream, all matches       |
//! | POST   | `/aggregate`     | [`AggregateRequest`]| [`AggregateResponse`]         |
//! | POST   | `/admin/lexicon` | [`LexiconRequest`]  | `202 {"job_id": n}`, 409 busy |
//! | GET    | `/admin/status`  |                     | [`StatusResponse`]            |
//!
//! Errors carry an [`ErrorBody`]. Parse errors answer 400 with a character
//! offset, semantic errors 422, and every query endpoint answers 503 until an
//! index is installed.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::{Body, Bytes};
use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tokio::sync::mpsc;
use tokio_stream::wrappers::ReceiverStream;

use crate::api::{
    self, AggregateRequest, AggregateResponse, ErrorBody, JobState, JobStatus, LexiconRequest, QueryError,
    QueryRequest, QueryResponse, StatusResponse,
};
use crate::corpus::apply_entity_lexicon;
use crate::index::Index;
use crate::matching::{EvalConfig, MatchStream};
use crate::qbe::ParseProvider;
use crate::results::{tsv_header, ExportRow};

pub const TSV_CONTENT_TYPE: &str = "text/tab-separated-values; charset=utf-8";

struct Inner {
    index: RwLock<Option<Arc<Index>>>,
    provider: Option<Arc<dyn ParseProvider>>,
    config: EvalConfig,
    job: Mutex<Option<JobStatus>>,
    next_job: AtomicU64,
}

/// Shared service state. Cloning is cheap.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

impl Service {
    pub fn new(index: Index, provider: Option<Arc<dyn ParseProvider>>, config: EvalConfig) -> Self {
        let service = Self::loading(provider, config);
        service.install(index);
        service
    }

    /// A service without an index yet. Query endpoints answer 503 until
    /// [`Service::install`] is called.
    pub fn loading(provider: Option<Arc<dyn ParseProvider>>, config: EvalConfig) -> Self {
        Service {
            inner: Arc::new(Inner {
                index: RwLock::new(None),
                provider,
                config,
                job: Mutex::new(None),
                next_job: AtomicU64::new(1),
            }),
        }
    }

    /// Replaces the served index. In-flight requests keep the old snapshot.
    pub fn install(&self, index: Index) {
        *self.inner.index.write().expect("index lock") = Some(Arc::new(index));
    }

    pub fn snapshot(&self) -> Option<Arc<Index>> {
        self.inner.index.read().expect("index lock").clone()
    }

    pub fn status(&self) -> StatusResponse {
        let index = self.snapshot();
        StatusResponse {
            ready: index.is_some(),
            index_version: index.as_ref().map(|i| i.version().to_string()),
            sentences: index.as_ref().map_or(0, |i| i.len()),
            documents: index.as_ref().map_or(0, |i| i.document_count()),
            job: self.inner.job.lock().expect("job lock").clone(),
        }
    }

    /// Starts a lexicon re-tag and rebuild on a blocking thread. Returns the
    /// job id, or `None` when another rebuild is still running.
    pub fn start_rebuild(&self, request: LexiconRequest) -> Result<Option<u64>, ApiError> {
        let Some(base) = self.snapshot() else { return Err(ApiError::Loading) };
        let id = {
            let mut job = self.inner.job.lock().expect("job lock");
            if matches!(job.as_ref().map(|j| &j.state), Some(JobState::Running)) {
                return Ok(None);
            }
            let id = self.inner.next_job.fetch_add(1, Ordering::Relaxed);
            *job = Some(JobStatus {
                id,
                state: JobState::Running,
                type_name: request.type_name.clone(),
                error: None,
                index_version: None,
            });
            id
        };
        let service = self.clone();
        tokio::task::spawn_blocking(move || {
            let result = apply_entity_lexicon(base.corpus(), &request.lexicon, &request.type_name).map(Index::build);
            let mut job = service.inner.job.lock().expect("job lock");
            let status = job.as_mut().expect("job recorded before spawn");
            match result {
                Ok(index) => {
                    status.index_version = Some(index.version().to_string());
                    status.state = JobState::Done;
                    service.install(index);
                }
                Err(e) => {
                    status.state = JobState::Failed;
                    status.error = Some(e.to_string());
                }
            }
        });
        Ok(Some(id))
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/query", post(query))
            .route("/export", post(export))
            .route("/aggregate", post(aggregate))
            .route("/admin/lexicon", post(lexicon))
            .route("/admin/status", get(status))
            .with_state(self.clone())
    }

    fn ready(&self) -> Result<Arc<Index>, ApiError> {
        self.snapshot().ok_or(ApiError::Loading)
    }

    fn provider(&self) -> Option<Arc<dyn ParseProvider>> {
        self.inner.provider.clone()
    }
}

/// Serves the router on a bound listener until the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener, service: Service) -> std::io::Result<()> {
    axum::serve(listener, service.router()).await
}

#[derive(Debug)]
pub enum ApiError {
    Query(QueryError),
    BadRequest(String),
    Loading,
    Busy,
    Internal(String),
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        ApiError::Query(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Query(e) => (StatusCode::from_u16(e.status()).expect("valid status"), e.body()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, ErrorBody::simple("request", "bad_request", m)),
            ApiError::Loading => (
                StatusCode::SERVICE_UNAVAILABLE,
                ErrorBody::simple("service", "loading", "index is still loading"),
            ),
            ApiError::Busy => {
                (StatusCode::CONFLICT, ErrorBody::simple("service", "busy", "a rebuild is already running"))
            }
            ApiError::Internal(m) => {
                (StatusCode::INTERNAL_SERVER_ERROR, ErrorBody::simple("service", "internal", m))
            }
        };
        (status, Json(body)).into_response()
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn query(
    State(svc): State<Service>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Json<QueryResponse>, ApiError> {
    let Json(req) = body?;
    let index = svc.ready()?;
    blocking(move || {
        let provider = svc.provider();
        Ok(api::run_query(&index, &req, provider.as_deref(), &svc.inner.config)?)
    })
    .await
    .map(Json)
}

async fn aggregate(
    State(svc): State<Service>,
    body: Result<Json<AggregateRequest>, JsonRejection>,
) -> Result<Json<AggregateResponse>, ApiError> {
    let Json(req) = body?;
    let index = svc.ready()?;
    blocking(move || {
        let provider = svc.provider();
        Ok(api::run_aggregate(&index, &req, provider.as_deref(), &svc.inner.config)?)
    })
    .await
    .map(Json)
}

async fn export(
    State(svc): State<Service>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let index = svc.ready()?;
    let version = index.version().to_string();
    let prepared = {
        let svc = svc.clone();
        blocking(move || {
            let provider = svc.provider();
            let query = api::compile_query(req.mode, &req.query, req.context.as_deref(), provider.as_deref())?;
            Ok(api::prepare(&query)?)
        })
        .await?
    };
    let (tx, rx) = mpsc::channel::<Result<Bytes, std::io::Error>>(64);
    tokio::task::spawn_blocking(move || {
        let stream = MatchStream::new(&index, prepared, svc.inner.config.clone());
        let names = stream.capture_names().to_vec();
        if tx.blocking_send(Ok(Bytes::from(tsv_header(&names)))).is_err() {
            return;
        }
        for m in stream {
            let line = ExportRow::from_match(&m, &names, index.as_ref()).to_tsv_line();
            if tx.blocking_send(Ok(Bytes::from(line))).is_err() {
                return;
            }
        }
    });
    Ok((
        [(header::CONTENT_TYPE, TSV_CONTENT_TYPE.to_string()), (header::ETAG, format!("\"{version}\""))],
        Body::from_stream(ReceiverStream::new(rx)),
    )
        .into_response())
}

#[derive(Serialize)]
struct JobAccepted {
    job_id: u64,
}

async fn lexicon(
    State(svc): State<Service>,
    body: Result<Json<LexiconRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    if req.type_name.trim().is_empty() {
        return Err(QueryError::semantic("empty_type_name", "entity type name is empty").into());
    }
    if req.lexicon.is_empty() || req.lexicon.iter().any(|e| e.trim().is_empty()) {
        return Err(QueryError::semantic("empty_lexicon", "lexicon is empty or has a blank entry").into());
    }
    match svc.start_rebuild(req)? {
        Some(job_id) => Ok((StatusCode::ACCEPTED, Json(JobAccepted { job_id })).into_response()),
        None => Err(ApiError::Busy),
    }
}

async fn status(State(svc): State<Service>) -> Json<StatusResponse> {
    Json(svc.status())
}

#[cfg(test)]
mod tests {
    use axum::http::Request;
    use http_body_util::BodyExt;
    use serde_json::{json, Value};
    use tower::ServiceExt;

    use super::*;
    use crate::corpus::load_corpus;

    fn fixture() -> Index {
        Index::build(load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl")).unwrap())
    }

    async fn call(router: &Router, method: &str, path: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder().method(method).uri(path).header(header::CONTENT_TYPE, "application/json");
        let req = match body {
            Some(b) => req.body(Body::from(b.to_string())).unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        let resp = router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    #[tokio::test]
    async fn loading_answers_503_then_serves() {
        let svc = Service::loading(None, EvalConfig::default());
        let router = svc.router();
        let body = json!({"mode": "boolean", "query": "stroke"});
        assert_eq!(call(&router, "POST", "/query", Some(body.clone())).await.0, StatusCode::SERVICE_UNAVAILABLE);
        let (code, bytes) = call(&router, "GET", "/admin/status", None).await;
        assert_eq!(code, StatusCode::OK);
        assert_eq!(serde_json::from_slice::<Value>(&bytes).unwrap()["ready"], json!(false));
        svc.install(fixture());
        assert_eq!(call(&router, "POST", "/query", Some(body)).await.0, StatusCode::OK);
    }

    #[tokio::test]
    async fn malformed_json_is_400() {
        let router = Service::new(fixture(), None, EvalConfig::default()).router();
        let (code, bytes) = call(&router, "POST", "/query", Some(json!({"mode": "fuzzy", "query": "x"}))).await;
        assert_eq!(code, StatusCode::BAD_REQUEST);
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["error"]["code"], "bad_request");
    }

    #[tokio::test]
    async fn unknown_capture_is_422() {
        let router = Service::new(fixture(), None, EvalConfig::default()).router();
        let body = json!({"mode": "boolean", "query": "r:e=DISEASE stroke", "capture": "q"});
        assert_eq!(call(&router, "POST", "/aggregate", Some(body)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    }

    #[tokio::test]
    async fn rebuild_swaps_version() {
        let svc = Service::new(fixture(), None, EvalConfig::default());
        let before = svc.snapshot().unwrap().version().to_string();
        let router = svc.router();
        let body = json!({"lexicon": ["nCov-19", "SARS-COV-ii"], "type_name": "COVID-19"});
        let (code, _) = call(&router, "POST", "/admin/lexicon", Some(body)).await;
        assert_eq!(code, StatusCode::ACCEPTED);
        let status = loop {
            let s = svc.status();
            if s.job.as_ref().unwrap().state != JobState::Running {
                break s;
            }
            tokio::time::sleep(std::time::Duration::from_millis(5)).await;
        };
        assert_eq!(status.job.unwrap().state, JobState::Done);
        assert_ne!(status.index_version.unwrap(), before);

        let bad = json!({"lexicon": [], "type_name": "X"});
        assert_eq!(call(&router, "POST", "/admin/lexicon", Some(bad)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    }
}
