//! REST interface over a set of sessions.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use impetus_core::mil::{LabelKind, LabelSource};
use impetus_core::slide::PatchBounds;
use impetus_core::triage::{Category, TriageDecision};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::error::{Result, ServiceError};
use crate::session::{OverlayKind, Session, SlideStatus, SlideSummary, SESSION_MANIFEST};

/// Sessions by id, each behind its own lock so a long retrain blocks only
/// its own session.
pub struct SessionManager {
    root: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<RwLock<Session>>>>,
}

impl SessionManager {
    /// Sessions live under `root` when given, otherwise only in memory.
    pub fn new(root: Option<PathBuf>) -> Self {
        Self {
            root,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    /// Reopens every persisted session under the root.
    pub fn load_existing(root: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&root)?;
        let manager = Self::new(Some(root.clone()));
        for entry in std::fs::read_dir(&root)? {
            let dir = entry?.path();
            if dir.join(SESSION_MANIFEST).is_file() {
                let session = Session::open(&dir)?;
                tracing::info!(session = session.id(), "session restored");
                manager.insert(session);
            }
        }
        Ok(manager)
    }

    pub fn insert(&self, session: Session) -> Arc<RwLock<Session>> {
        let id = session.id().to_string();
        let handle = Arc::new(RwLock::new(session));
        self.sessions.write().insert(id, Arc::clone(&handle));
        handle
    }

    pub fn get(&self, id: &str) -> Result<Arc<RwLock<Session>>> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn create(&self, slide_dirs: &[PathBuf], config: SessionConfig) -> Result<Arc<RwLock<Session>>> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.root.as_ref().map(|r| r.join(&id));
        let session = Session::create(id, dir, slide_dirs, config.apply_env()?)?;
        Ok(self.insert(session))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        use impetus_core::Error as E;
        match self {
            Self::UnknownSession(_) | Self::UnknownSlide(_) => StatusCode::NOT_FOUND,
            Self::Core(E::TileOutOfRange { .. }) => StatusCode::NOT_FOUND,
            Self::ConfirmedSlide(_) | Self::AlreadyConfirmed(_) | Self::NoModelYet => StatusCode::CONFLICT,
            Self::Core(E::InvalidBounds(_) | E::EmptyBox | E::UnknownStrategy { .. })
            | Self::EmptySlideList
            | Self::BadRequest(_)
            | Self::DuplicateSlide(_)
            | Self::FeatureDimension { .. }
            | Self::SlideLoad { .. }
            | Self::MissingTruth(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            Self::UnknownSession(_) => "unknown_session",
            Self::UnknownSlide(_) => "unknown_slide",
            Self::ConfirmedSlide(_) => "slide_confirmed",
            Self::AlreadyConfirmed(_) => "already_confirmed",
            Self::NoModelYet => "no_model_yet",
            Self::Core(impetus_core::Error::EmptyBox) => "empty_box",
            Self::Core(impetus_core::Error::InvalidBounds(_)) => "invalid_bounds",
            Self::Core(impetus_core::Error::TileOutOfRange { .. }) => "tile_not_found",
            Self::EmptySlideList => "empty_slide_list",
            Self::FeatureDimension { .. } => "feature_dimension_mismatch",
            Self::SlideLoad { .. } => "slide_load_failed",
            _ => "error",
        }
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let body = ErrorBody {
            error: self.code(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateSessionBody {
    pub slide_dirs: Vec<PathBuf>,
    #[serde(default)]
    pub config: SessionConfig,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
    pub slides: Vec<SlideSummary>,
}

#[derive(Debug, Deserialize)]
pub struct LabelBody {
    pub bounds: PatchBounds,
    pub label: LabelKind,
    pub source: Option<LabelSource>,
}

#[derive(Debug, Deserialize)]
pub struct DiagnosisBody {
    pub category: Category,
}

#[derive(Debug, Deserialize)]
pub struct OverlayQuery {
    pub kind: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TriageResponse {
    pub slide_id: String,
    pub iteration: u32,
    pub model_version: Option<u32>,
    pub status: SlideStatus,
    /// `null` until a model exists.
    pub decision: Option<TriageDecision>,
    pub final_diagnosis: Option<Category>,
}

type AppState = Arc<SessionManager>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e.to_string())))?
}

async fn create_session(State(m): State<AppState>, Json(body): Json<CreateSessionBody>) -> Result<(StatusCode, Json<CreateSessionResponse>)> {
    let out = blocking(move || {
        let handle = m.create(&body.slide_dirs, body.config)?;
        let s = handle.read();
        Ok(CreateSessionResponse {
            session_id: s.id().to_string(),
            slides: s.summaries(),
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn list_slides(State(m): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<SlideSummary>>> {
    Ok(Json(m.get(&id)?.read().summaries()))
}

fn parse_tile_name(name: &str) -> Result<(u32, u32)> {
    let bad = || ServiceError::BadRequest(format!("tile name {name:?} is not <x>_<y>.png"));
    let stem = name.strip_suffix(".png").ok_or_else(bad)?;
    let (x, y) = stem.split_once('_').ok_or_else(bad)?;
    Ok((x.parse().map_err(|_| bad())?, y.parse().map_err(|_| bad())?))
}

async fn get_tile(State(m): State<AppState>, Path((id, sid, level, tile)): Path<(String, String, usize, String)>) -> Result<Response> {
    let (x, y) = parse_tile_name(&tile)?;
    let path = m.get(&id)?.read().tile_file(&sid, level, x, y)?;
    let bytes: Vec<u8> = std::fs::read(&path)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn get_overlay(
    State(m): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
    Query(q): Query<OverlayQuery>,
) -> Result<Response> {
    let kind: OverlayKind = q.kind.parse()?;
    let overlay = m.get(&id)?.read().overlay(&sid, kind)?;
    Ok(Json(overlay).into_response())
}

async fn post_label(
    State(m): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
    Json(body): Json<LabelBody>,
) -> Result<Response> {
    let handle = m.get(&id)?;
    let outcome = blocking(move || {
        let req = crate::session::LabelRequest {
            slide_id: sid,
            bounds: body.bounds,
            label: body.label,
            source: body.source.unwrap_or(LabelSource::Marquee),
            timestamp: None,
        };
        handle.write().submit_label(req)
    })
    .await?;
    Ok(Json(outcome).into_response())
}

async fn post_diagnosis(
    State(m): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
    Json(body): Json<DiagnosisBody>,
) -> Result<Json<SlideSummary>> {
    let handle = m.get(&id)?;
    let summary = handle.write().confirm_diagnosis(&sid, body.category)?;
    Ok(Json(summary))
}

async fn get_triage(State(m): State<AppState>, Path((id, sid)): Path<(String, String)>) -> Result<Json<TriageResponse>> {
    let handle = m.get(&id)?;
    let session = handle.read();
    let s = session.slide(&sid)?;
    Ok(Json(TriageResponse {
        slide_id: s.id.clone(),
        iteration: s.scores.iteration,
        model_version: s.model_version,
        status: s.status,
        decision: s.triage,
        final_diagnosis: s.final_diagnosis,
    }))
}

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/slides", get(list_slides))
        .route("/sessions/{id}/slides/{sid}/tiles/{level}/{tile}", get(get_tile))
        .route("/sessions/{id}/slides/{sid}/overlay", get(get_overlay))
        .route("/sessions/{id}/slides/{sid}/labels", post(post_label))
        .route("/sessions/{id}/slides/{sid}/diagnosis", post(post_diagnosis))
        .route("/sessions/{id}/slides/{sid}/triage", get(get_triage))
        .with_state(manager)
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(manager: Arc<SessionManager>, addr: std::net::SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(manager))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
