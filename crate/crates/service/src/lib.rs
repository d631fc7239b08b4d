//! HTTP session service: upload a capture, pick and edit the wound boundary,
//! generate the patch and download STL / G-code.
//!
//! Requests to one session are serialized; sessions proceed independently.
//! Pipeline runs happen on the blocking pool and can be cancelled.

pub mod error;
pub mod session;
pub mod wire;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex as StdMutex};

use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use tokio::sync::{Mutex, RwLock};
use woundpatch::capture::{decode_bundle, load_bundle, save_bundle, BundleParts};
use woundpatch::pipeline::{generate_patch, CancelToken};

use error::ApiError;
use session::{CachedArtifacts, PersistedState, Session};
use wire::{
    ArtifactManifest, BoundaryAccepted, BoundaryRequest, GenerateRequest, Preview, SeedRequest, SessionCreated,
    SessionSummary, ThresholdRequest,
};

const STATE_FILE: &str = "state.json";
/// Upload limit; a full-resolution RGB frame plus score map stays well below it.
pub const MAX_UPLOAD_BYTES: usize = 256 * 1024 * 1024;

/// One session: its edit state behind an async lock, plus the token of any running generate.
pub struct SessionHandle {
    state: Mutex<Session>,
    running: StdMutex<Option<CancelToken>>,
}

impl SessionHandle {
    fn new(s: Session) -> Arc<Self> {
        Arc::new(Self {
            state: Mutex::new(s),
            running: StdMutex::new(None),
        })
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<SessionHandle>>>>,
    state_dir: Option<PathBuf>,
}

impl AppState {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Persists sessions under `dir`, restoring any found there.
    pub fn with_state_dir(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&dir)? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            let id = entry.file_name().to_string_lossy().into_owned();
            match restore_session(&entry.path(), id.clone()) {
                Ok(s) => {
                    sessions.insert(id, SessionHandle::new(s));
                }
                Err(e) => tracing::warn!("skipping session {id}: {e}"),
            }
        }
        Ok(Self {
            sessions: Arc::new(RwLock::new(sessions)),
            state_dir: Some(dir),
        })
    }

    pub async fn session_count(&self) -> usize {
        self.sessions.read().await.len()
    }

    async fn get(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session"))
    }

    fn persist(&self, s: &Session) -> Result<(), ApiError> {
        let Some(dir) = &self.state_dir else { return Ok(()) };
        let path = dir.join(&s.id).join(STATE_FILE);
        let json = serde_json::to_vec_pretty(&s.persisted()).map_err(|e| ApiError::internal(e.to_string()))?;
        std::fs::write(&path, json).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))
    }
}

fn restore_session(dir: &Path, id: String) -> Result<Session, String> {
    let bundle = load_bundle(dir).map_err(|e| e.to_string())?;
    let state = match std::fs::read(dir.join(STATE_FILE)) {
        Ok(bytes) => serde_json::from_slice::<PersistedState>(&bytes).map_err(|e| e.to_string())?,
        Err(_) => Session::new(id.clone(), bundle.clone()).map_err(|e| e.body.message)?.persisted(),
    };
    Ok(Session::restore(id, bundle, state))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/seed", post(set_seed))
        .route("/sessions/{id}/threshold", post(set_threshold))
        .route("/sessions/{id}/boundary", put(put_boundary))
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/cancel", post(cancel))
        .route("/sessions/{id}/artifacts/{kind}", get(artifact))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

fn json_body<T: serde::de::DeserializeOwned>(stage: &str, bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(stage, e.to_string()))
}

async fn create_session(State(app): State<AppState>, mut form: Multipart) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let mut parts = BundleParts::default();
    let (mut manifest, mut rgb, mut depth) = (false, false, false);
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request("capture", e.to_string()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request("capture", e.to_string()))?
            .to_vec();
        match name.as_str() {
            "manifest" => (parts.manifest, manifest) = (bytes, true),
            "rgb" => (parts.rgb_png, rgb) = (bytes, true),
            "depth" => (parts.depth_png, depth) = (bytes, true),
            "score" => parts.score_f32 = Some(bytes),
            other => return Err(ApiError::bad_request("capture", format!("unexpected field `{other}`"))),
        }
    }
    for (present, name) in [(manifest, "manifest"), (rgb, "rgb"), (depth, "depth")] {
        if !present {
            return Err(ApiError::bad_request("capture", format!("missing field `{name}`")));
        }
    }
    let bundle = tokio::task::spawn_blocking(move || decode_bundle(&parts))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "capture", "invalid_bundle", e.to_string()))?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let created = SessionCreated {
        id: id.clone(),
        width: bundle.intrinsics.width,
        height: bundle.intrinsics.height,
        default_threshold: bundle.default_threshold,
        has_score: bundle.score.is_some(),
    };
    let session = Session::new(id.clone(), bundle)?;
    if let Some(dir) = &app.state_dir {
        let sdir = dir.join(&id);
        let b = session.bundle.clone();
        tokio::task::spawn_blocking(move || save_bundle(&b, sdir))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .map_err(|e| ApiError::internal(e.to_string()))?;
        app.persist(&session)?;
    }
    app.sessions.write().await.insert(id, SessionHandle::new(session));
    Ok((StatusCode::CREATED, Json(created)))
}

async fn get_session(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionSummary>, ApiError> {
    let h = app.get(&id).await?;
    let s = h.state.lock().await;
    Ok(Json(s.summary()))
}

async fn set_seed(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> Result<Json<Preview>, ApiError> {
    let req: SeedRequest = json_body("segmentation", &body)?;
    let h = app.get(&id).await?;
    let mut s = h.state.lock().await;
    let p = s.set_seed((req.x, req.y))?;
    app.persist(&s)?;
    Ok(Json(p))
}

async fn set_threshold(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> Result<Json<Preview>, ApiError> {
    let req: ThresholdRequest = json_body("segmentation", &body)?;
    let h = app.get(&id).await?;
    let mut s = h.state.lock().await;
    let p = s.set_threshold(req.value)?;
    app.persist(&s)?;
    Ok(Json(p))
}

async fn put_boundary(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> Result<Json<BoundaryAccepted>, ApiError> {
    let req: BoundaryRequest = json_body("segmentation", &body)?;
    let h = app.get(&id).await?;
    let mut s = h.state.lock().await;
    let accepted = s.put_boundary(req.vertices)?;
    app.persist(&s)?;
    Ok(Json(accepted))
}

/// Cancels the held token if the request future is dropped mid-run.
struct CancelOnDrop(Option<CancelToken>);

impl CancelOnDrop {
    fn disarm(mut self) {
        self.0 = None;
    }
}

impl Drop for CancelOnDrop {
    fn drop(&mut self) {
        if let Some(t) = &self.0 {
            t.cancel();
        }
    }
}

async fn generate(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> Result<Json<ArtifactManifest>, ApiError> {
    let req: GenerateRequest = json_body("generate", &body)?;
    let h = app.get(&id).await?;
    let mut s = h.state.lock().await;
    let boundary = s
        .boundary
        .clone()
        .ok_or_else(|| ApiError::conflict("no_boundary", "confirm a boundary before generating"))?;
    let key = s.cache_key(req.thickness_mm, &req.slicer);
    if let Some(c) = &s.artifacts {
        if c.key == key {
            return Ok(Json(c.manifest(true)));
        }
    }
    let token = CancelToken::new();
    *h.running.lock().expect("running lock") = Some(token.clone());
    let guard = CancelOnDrop(Some(token.clone()));
    let bundle = s.bundle.clone();
    let seed = s.mesh_seed();
    let result = tokio::task::spawn_blocking(move || {
        generate_patch(&bundle, &boundary, seed, req.thickness_mm, &req.slicer, &token)
    })
    .await;
    *h.running.lock().expect("running lock") = None;
    guard.disarm();
    let patch = result.map_err(|e| ApiError::internal(e.to_string()))??;
    let cached = CachedArtifacts {
        key,
        flat_area_cm2: patch.flat_area_cm2(),
        mesh_area_cm2: patch.mesh_area_cm2(),
        stl: Arc::new(patch.artifacts.stl),
        gcode: Arc::new(patch.artifacts.gcode),
    };
    let manifest = cached.manifest(false);
    s.artifacts = Some(cached);
    Ok(Json(manifest))
}

async fn cancel(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<StatusCode, ApiError> {
    let h = app.get(&id).await?;
    let running = h.running.lock().expect("running lock").clone();
    match running {
        Some(t) => {
            t.cancel();
            Ok(StatusCode::ACCEPTED)
        }
        None => Ok(StatusCode::NO_CONTENT),
    }
}

async fn artifact(State(app): State<AppState>, UrlPath((id, kind)): UrlPath<(String, String)>) -> Result<Response, ApiError> {
    let h = app.get(&id).await?;
    let s = h.state.lock().await;
    let a = s
        .artifacts
        .as_ref()
        .ok_or_else(|| ApiError::conflict("no_artifacts", "generate before downloading"))?;
    match kind.as_str() {
        "stl" => Ok((
            [
                (header::CONTENT_TYPE, "model/stl"),
                (header::CONTENT_DISPOSITION, "attachment; filename=\"patch.stl\""),
            ],
            a.stl.as_ref().clone(),
        )
            .into_response()),
        "gcode" => Ok((
            [
                (header::CONTENT_TYPE, "text/x-gcode"),
                (header::CONTENT_DISPOSITION, "attachment; filename=\"patch.gcode\""),
            ],
            a.gcode.as_ref().clone(),
        )
            .into_response()),
        _ => Err(ApiError::not_found("artifact kind")),
    }
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: std::net::SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
