use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use forgescore_core::labels::SplitManifest;
use log::info;
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::journal::{Journal, ReviewEvent, Verdict};
use crate::session::Session;
use crate::state::ReviewState;
use crate::thumb::thumbnail;
use crate::ReviewError;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Where finalized split manifests are written, if anywhere.
    pub split_out: Option<PathBuf>,
    /// Static files served at `/`.
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct Snapshot {
    state: ReviewState,
    finalized: Option<SplitManifest>,
}

/// Shared service state: readers clone the current snapshot, writers go
/// through the journal mutex and publish a new snapshot.
pub struct ReviewService {
    session: Option<Arc<Session>>,
    snapshot: RwLock<Arc<Snapshot>>,
    journal: Mutex<Option<Journal>>,
    config: ServiceConfig,
}

impl ReviewService {
    /// Replays `journal` into the session's review state. Every journaled
    /// video must be a review candidate of the session.
    pub fn open(
        session: Session,
        journal: Journal,
        events: &[ReviewEvent],
        config: ServiceConfig,
    ) -> Result<Self, ReviewError> {
        for ev in events {
            session.check_verdict(&ev.video_id, ev.verdict).map_err(|e| ReviewError::CorruptJournal {
                path: journal.path().to_path_buf(),
                line: 0,
                message: format!("event seq {}: {e}", ev.seq),
            })?;
        }
        let state = ReviewState::replay(events);
        info!("replayed {} review events (last seq {})", events.len(), state.last_seq);
        Ok(Self {
            session: Some(Arc::new(session)),
            snapshot: RwLock::new(Arc::new(Snapshot { state, finalized: None })),
            journal: Mutex::new(Some(journal)),
            config,
        })
    }

    /// A service with nothing to review; review endpoints answer 409.
    pub fn without_session(config: ServiceConfig) -> Self {
        Self {
            session: None,
            snapshot: RwLock::new(Arc::new(Snapshot { state: ReviewState::default(), finalized: None })),
            journal: Mutex::new(None),
            config,
        }
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn session(&self) -> Result<&Arc<Session>, ReviewError> {
        self.session.as_ref().ok_or(ReviewError::NoSession)
    }

    pub fn state(&self) -> ReviewState {
        self.snapshot().state.clone()
    }

    /// Records a verdict. Returns the event and whether it repeated the
    /// current effective verdict (in which case nothing is written).
    pub fn review(&self, video_id: &str, verdict: Verdict, reviewer: &str) -> Result<(ReviewEvent, bool), ReviewError> {
        let session = self.session()?;
        session.check_verdict(video_id, verdict)?;
        let mut journal = self.journal.lock().expect("journal lock");
        let journal = journal.as_mut().ok_or(ReviewError::NoSession)?;
        let current = self.snapshot();
        if let Some(e) =
            current.state.verdicts.get(video_id).filter(|_| current.state.is_duplicate(video_id, verdict, reviewer))
        {
            let ev = ReviewEvent {
                seq: e.seq,
                timestamp: String::new(),
                video_id: video_id.to_string(),
                verdict,
                reviewer: reviewer.to_string(),
            };
            return Ok((ev, true));
        }
        let ev = journal.append(video_id, verdict, reviewer, chrono::Utc::now().to_rfc3339())?;
        let mut next = (*current).clone();
        next.state.apply(&ev);
        *self.snapshot.write().expect("snapshot lock") = Arc::new(next);
        Ok((ev, false))
    }

    pub fn finalize(&self, force: bool) -> Result<SplitManifest, ReviewError> {
        let session = self.session()?;
        // hold the writer so no verdict lands between split and publish
        let _guard = self.journal.lock().expect("journal lock");
        let current = self.snapshot();
        let m = session.finalize(&current.state, force, Some(chrono::Utc::now().to_rfc3339()))?;
        if let Some(path) = &self.config.split_out {
            let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
            text.push('\n');
            std::fs::write(path, text).map_err(|source| ReviewError::Io { path: path.clone(), source })?;
        }
        let mut next = (*current).clone();
        next.finalized = Some(m.clone());
        *self.snapshot.write().expect("snapshot lock") = Arc::new(next);
        Ok(m)
    }
}

struct ApiError(ReviewError);

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(json!({ "error": self.0.code(), "message": self.0.to_string() }))).into_response()
    }
}

fn bad_request(message: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": "bad_request", "message": message }))).into_response()
}

type Shared = Arc<ReviewService>;

async fn queue(State(svc): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let session = svc.session()?;
    let class = Session::parse_class(q.get("class").map(String::as_str).unwrap_or(""))?;
    let limit = match q.get("limit") {
        Some(raw) => match raw.parse::<usize>() {
            Ok(n) => Some(n),
            Err(_) => return Ok(bad_request(format!("invalid limit `{raw}`"))),
        },
        None => None,
    };
    let snap = svc.snapshot();
    Ok(Json(session.queue(&snap.state, class, limit)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReviewBody {
    video_id: String,
    verdict: Verdict,
    #[serde(default)]
    reviewer: String,
}

async fn review(State(svc): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let value: serde_json::Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return Ok(bad_request(format!("body is not JSON: {e}"))),
    };
    let body: ReviewBody = serde_json::from_value(value).map_err(|e| ReviewError::InvalidVerdict(e.to_string()))?;
    let (event, duplicate) = svc.review(&body.video_id, body.verdict, &body.reviewer)?;
    let snap = svc.snapshot();
    let progress = svc.session()?.progress(&snap.state, snap.finalized.as_ref());
    Ok(Json(json!({ "event": event, "duplicate": duplicate, "progress": progress })).into_response())
}

async fn finalize(State(svc): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let force = q.get("force").is_some_and(|v| v == "true" || v == "1");
    Ok(Json(svc.finalize(force)?).into_response())
}

async fn progress(State(svc): State<Shared>) -> Result<Response, ApiError> {
    let session = svc.session()?;
    let snap = svc.snapshot();
    Ok(Json(session.progress(&snap.state, snap.finalized.as_ref())).into_response())
}

async fn thumb(
    State(svc): State<Shared>,
    Path((video_id, frame)): Path<(String, usize)>,
) -> Result<Response, ApiError> {
    let session = svc.session()?;
    let video = session.video(&video_id)?;
    Ok(Json(thumbnail(video, frame)?).into_response())
}

pub fn router(svc: Arc<ReviewService>) -> Router {
    let ui_dir = svc.config.ui_dir.clone();
    let api = Router::new()
        .route("/api/queue", get(queue))
        .route("/api/review", post(review))
        .route("/api/finalize", post(finalize))
        .route("/api/progress", get(progress))
        .route("/api/thumb/{video_id}/{frame}", get(thumb))
        .with_state(svc);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    svc: Arc<ReviewService>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(svc)).with_graceful_shutdown(shutdown).await
}
