//! REST API over a run directory for the review UI.
//!
//! Reads come from the run's artifacts, reloaded when a file changes on
//! disk. Decisions go through a single writer that validates each one
//! against the replayed log before appending it to `decisions.jsonl`.
//! Sentiments needed by a changed mapping are classified on demand and kept
//! in memory.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::SystemTime;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::align::{
    append_decision, apply_decisions, read_decisions, Action, AlignError, AlignmentResult, DecisionRecord,
    FinalMapping, LabelPayload,
};
use crate::pipeline::{sentiment_provider, PipelineError, RunData, SentimentChoice, MANIFEST};
use crate::report::{build_report, ReportError};
use crate::sentiment::SentimentProvider;

pub const DEFAULT_BIND: &str = "127.0.0.1:8787";
pub const DEFAULT_SAMPLE_LIMIT: usize = 20;

/// Files whose change triggers a reload.
const WATCHED: [&str; 11] = [
    MANIFEST,
    "ingest.json",
    "stats.json",
    "clean.jsonl",
    "coherence.csv",
    "model.json",
    "theta.bin",
    "topics.json",
    "alignments.json",
    "taxonomy.json",
    "sentiments.jsonl",
];

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("run directory is missing artifacts: {0}")]
    MissingArtifacts(String),
    #[error("address {0} is already in use")]
    AddressInUse(SocketAddr),
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<PipelineError> for ServerError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::IncompleteRun(m) => ServerError::MissingArtifacts(m),
            other => ServerError::Pipeline(other),
        }
    }
}

/// Error response: `{"error": code, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::IncompleteRun(m) => Self::new(StatusCode::SERVICE_UNAVAILABLE, "incomplete_run", m),
            other => Self::internal(other),
        }
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::IncompleteRun(m) => Self::new(StatusCode::SERVICE_UNAVAILABLE, "incomplete_run", m),
            other => Self::internal(other),
        }
    }
}

impl From<AlignError> for ApiError {
    fn from(e: AlignError) -> Self {
        match e {
            AlignError::UnknownTopic(t) => Self::not_found(format!("no topic {t}")),
            AlignError::UnknownLabel(_)
            | AlignError::MissingLabel { .. }
            | AlignError::DuplicateId(_)
            | AlignError::Schema(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_decision", e.to_string()),
            other => Self::internal(other),
        }
    }
}

type Stamps = BTreeMap<&'static str, Option<(SystemTime, u64)>>;

fn stamps(dir: &Path) -> Stamps {
    WATCHED
        .iter()
        .map(|&f| {
            let meta = std::fs::metadata(dir.join(f)).ok();
            (f, meta.and_then(|m| Some((m.modified().ok()?, m.len()))))
        })
        .collect()
}

struct Loaded {
    data: RunData,
    stamps: Stamps,
}

/// Shared state: the loaded run, the sentiment provider for on-demand
/// classification, and the decision writer lock.
pub struct AppState {
    run_dir: PathBuf,
    loaded: RwLock<Loaded>,
    provider: Box<dyn SentimentProvider>,
    threads: usize,
    writer: Mutex<()>,
}

impl AppState {
    /// Opens a run directory using the sentiment provider of its config.
    pub fn open(run_dir: &Path) -> Result<Self, ServerError> {
        let data = RunData::load(run_dir)?;
        let provider = sentiment_provider(&data.config)?;
        Ok(Self::with_provider(data, provider))
    }

    pub fn with_provider(data: RunData, provider: Box<dyn SentimentProvider>) -> Self {
        let threads = match data.config.sentiment_provider {
            SentimentChoice::HttpAbsa => data.config.max_in_flight,
            SentimentChoice::Lexicon => std::thread::available_parallelism().map_or(1, |n| n.get()).min(8),
        };
        let run_dir = data.dir.clone();
        Self {
            run_dir: run_dir.clone(),
            loaded: RwLock::new(Loaded {
                stamps: stamps(&run_dir),
                data,
            }),
            provider,
            threads,
            writer: Mutex::new(()),
        }
    }

    /// Reloads the run if any artifact changed on disk. A failed reload keeps
    /// the previous state.
    fn refresh(&self) {
        let now = stamps(&self.run_dir);
        if self.loaded.read().unwrap().stamps == now {
            return;
        }
        match RunData::load(&self.run_dir) {
            Ok(data) => {
                log::info!("reloaded {}", self.run_dir.display());
                *self.loaded.write().unwrap() = Loaded { data, stamps: now };
            }
            Err(e) => log::warn!("reload of {} failed: {e}", self.run_dir.display()),
        }
    }

    fn read<R>(&self, f: impl FnOnce(&RunData) -> Result<R, ApiError>) -> Result<R, ApiError> {
        self.refresh();
        f(&self.loaded.read().unwrap().data)
    }

    /// Runs `f` with the current mapping, after classifying any
    /// (review, principle) pair it needs that has no sentiment yet.
    fn with_sentiments<R>(&self, f: impl FnOnce(&RunData, &FinalMapping) -> Result<R, ApiError>) -> Result<R, ApiError> {
        self.refresh();
        {
            let guard = self.loaded.read().unwrap();
            let mapping = guard.data.mapping()?;
            if guard.data.missing_pairs(&mapping).is_empty() {
                return f(&guard.data, &mapping);
            }
        }
        let mut guard = self.loaded.write().unwrap();
        let mapping = guard.data.mapping()?;
        let added = guard
            .data
            .complete_sentiments(&mapping, self.provider.as_ref(), self.threads)?;
        log::info!("classified {added} new review-aspect pairs");
        f(&guard.data, &mapping)
    }

    fn decide(&self, topic: usize, req: DecisionRequest) -> Result<AlignmentResult, ApiError> {
        let _w = self.writer.lock().unwrap();
        self.read(|data| {
            if !data.alignments.iter().any(|a| a.topic_id == topic) {
                return Err(ApiError::not_found(format!("no topic {topic}")));
            }
            let record = DecisionRecord {
                topic_id: topic,
                action: req.action,
                label: req.label,
                note: req.note,
                decided_at: Utc::now(),
            };
            let path = data.decisions_path();
            let mut log = read_decisions(&path)?;
            log.push(record.clone());
            // validate against the full replay before anything is written
            let mapping = apply_decisions(&data.alignments, &data.taxonomy, &log)?;
            append_decision(&path, &record)?;
            Ok(mapping
                .alignments
                .into_iter()
                .find(|a| a.topic_id == topic)
                .expect("topic exists"))
        })
    }
}

/// Body of `POST /api/alignments/{k}/decision`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub action: Action,
    #[serde(default)]
    pub label: Option<LabelPayload>,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReview {
    pub review_id: String,
    pub text: String,
    pub theta: f64,
}

#[derive(Deserialize)]
struct LimitQuery {
    limit: Option<usize>,
}

/// Reviews assigned to `topic` (θ at or above the secondary threshold), by
/// θ descending then id, at most `limit`.
pub fn sample_reviews(data: &RunData, topic: usize, limit: usize) -> Result<Vec<SampleReview>, ApiError> {
    let k = data.model.num_topics();
    if topic >= k {
        return Err(ApiError::not_found(format!("topic {topic} out of range (k = {k})")));
    }
    let mut out: Vec<SampleReview> = data
        .assignments
        .iter()
        .filter(|(_, a)| a.secondary.contains(&topic))
        .filter_map(|(id, _)| {
            let row = data.model.doc_row(id)?;
            Some(SampleReview {
                review_id: id.clone(),
                text: data.documents.get(id).map(|d| d.raw_text.clone()).unwrap_or_default(),
                theta: data.model.theta.get(row, topic),
            })
        })
        .collect();
    out.sort_by(|a, b| b.theta.total_cmp(&a.theta).then_with(|| a.review_id.cmp(&b.review_id)));
    out.truncate(limit);
    Ok(out)
}

async fn blocking<R: Send + 'static>(f: impl FnOnce() -> Result<R, ApiError> + Send + 'static) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

type S = State<Arc<AppState>>;

async fn stats(State(st): S) -> Result<impl IntoResponse, ApiError> {
    blocking(move || {
        st.read(|d| {
            Ok(Json(serde_json::json!({
                "ingest": d.ingest,
                "stats": d.stats.table,
                "unreadable": d.stats.unreadable.len(),
                "documents": d.stats.documents,
                "modeled_reviews": d.model.doc_ids.len(),
            })))
        })
    })
    .await
}

async fn topics(State(st): S) -> Result<impl IntoResponse, ApiError> {
    blocking(move || st.read(|d| Ok(Json(d.topics.topics.clone())))).await
}

fn parse_topic(raw: &str) -> Result<usize, ApiError> {
    raw.parse().map_err(|_| ApiError::not_found(format!("no topic {raw:?}")))
}

async fn topic_reviews(
    State(st): S,
    UrlPath(k): UrlPath<String>,
    q: Result<Query<LimitQuery>, QueryRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let topic = parse_topic(&k)?;
    let Query(q) = q.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let limit = q.limit.unwrap_or(DEFAULT_SAMPLE_LIMIT);
    blocking(move || st.read(|d| Ok(Json(sample_reviews(d, topic, limit)?)))).await
}

async fn alignments(State(st): S) -> Result<impl IntoResponse, ApiError> {
    blocking(move || st.read(|d| Ok(Json(d.mapping()?.alignments)))).await
}

async fn decision(
    State(st): S,
    UrlPath(k): UrlPath<String>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let topic = parse_topic(&k)?;
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    blocking(move || st.decide(topic, req)).await.map(Json)
}

async fn ethics(State(st): S) -> Result<impl IntoResponse, ApiError> {
    blocking(move || st.with_sentiments(|d, m| Ok(Json(build_report(d, m)?.ethics)))).await
}

async fn report(State(st): S) -> Result<impl IntoResponse, ApiError> {
    blocking(move || st.with_sentiments(|d, m| Ok(Json(build_report(d, m)?)))).await
}

async fn coherence(State(st): S) -> Result<impl IntoResponse, ApiError> {
    blocking(move || {
        st.read(|d| {
            let points: Vec<_> = d
                .curve
                .points
                .iter()
                .map(|&(k, c_v)| serde_json::json!({"k": k, "c_v": c_v}))
                .collect();
            Ok(Json(serde_json::json!({"points": points, "best_k": d.curve.best_k, "k": d.topics.k})))
        })
    })
    .await
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

/// The API routes, plus the UI's static files under `/ui` when given.
pub fn router(state: Arc<AppState>, ui_dir: Option<&Path>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    let mut app = Router::new()
        .route("/api/stats", get(stats))
        .route("/api/topics", get(topics))
        .route("/api/topics/{k}/reviews", get(topic_reviews))
        .route("/api/alignments", get(alignments))
        .route("/api/alignments/{k}/decision", post(decision))
        .route("/api/ethics", get(ethics))
        .route("/api/report", get(report))
        .route("/api/coherence", get(coherence));
    if let Some(dir) = ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    app.fallback(fallback).layer(cors).with_state(state)
}

/// Serves a run directory until the process is interrupted.
pub async fn serve(run_dir: &Path, addr: SocketAddr, ui_dir: Option<&Path>) -> Result<(), ServerError> {
    let dir = run_dir.to_path_buf();
    let state = tokio::task::spawn_blocking(move || AppState::open(&dir))
        .await
        .map_err(|e| ServerError::Io(std::io::Error::other(e)))??;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServerError::AddressInUse(addr),
        _ => e.into(),
    })?;
    log::info!("serving {} on http://{}", run_dir.display(), listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state), ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
