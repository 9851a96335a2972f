//! HTTP assignment endpoint over a model bundle.
//!
//! * `POST /assign`: [`AssignRequest`] in, [`AssignResponse`] out
//! * `GET /health`: bundle fingerprint and uptime
//! * `GET /model`: kind, classes and training metadata
//!
//! The bundle is held behind an `Arc` that [`ServiceHandle::reload`] (or
//! SIGHUP under [`serve_blocking`]) swaps atomically. Requests that already
//! hold the old bundle finish on it; requests arriving while the new bundle
//! loads get 503.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::sync::{oneshot, Semaphore};

use crate::corpus::{Attachment, AttachmentKind, Content, IssueReport, Status};
use crate::models::{load_bundle, BundleError, LoadedBundle, ModelKind, Prediction};
use crate::ocr::{self, OcrBackend, OcrCache, OcrError};
use crate::util;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Ocr(#[from] OcrError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("a reload is already in progress")]
    ReloadInProgress,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bundle_dir: PathBuf,
    pub bind: SocketAddr,
    /// OCR backend spec, see [`ocr::backend_from_spec`].
    pub backend: String,
    /// Concurrent OCR calls across all requests.
    pub ocr_workers: usize,
    /// Scores and explanation terms returned per request.
    pub top_k: usize,
}

impl ServiceConfig {
    pub fn new(bundle_dir: impl Into<PathBuf>) -> Self {
        Self {
            bundle_dir: bundle_dir.into(),
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            backend: "inline".into(),
            ocr_workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
            top_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestAttachment {
    #[serde(default)]
    pub id: Option<String>,
    /// `screenshot` or `other`; inferred from `id` when absent, and
    /// attachments without an extension count as screenshots.
    #[serde(default)]
    pub kind: Option<AttachmentKind>,
    /// Text already extracted from the image.
    #[serde(default)]
    pub text: Option<String>,
    /// Base64-encoded image bytes, run through the OCR backend.
    #[serde(default)]
    pub image_base64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignRequest {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub attachments: Vec<RequestAttachment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignResponse {
    #[serde(flatten)]
    pub prediction: Prediction,
    /// Wall time from request parse to response, OCR included.
    pub latency_s: f64,
    pub model_fingerprint: String,
}

struct AppState {
    bundle: RwLock<Arc<LoadedBundle>>,
    reloading: AtomicBool,
    backend: Box<dyn OcrBackend>,
    cache: OcrCache,
    ocr_slots: Semaphore,
    started: Instant,
    bundle_dir: PathBuf,
    top_k: usize,
}

impl AppState {
    fn current(&self) -> Arc<LoadedBundle> {
        Arc::clone(&self.bundle.read().expect("bundle lock"))
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn unavailable() -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, "model bundle is reloading")
}

enum RequestError {
    Malformed(String),
    Invalid(String),
}

/// Image payloads are written under `scratch` so that file-based backends
/// can read them.
fn to_report(req: AssignRequest, scratch: &Path) -> Result<IssueReport, RequestError> {
    if req.summary.trim().is_empty() && req.description.trim().is_empty() {
        return Err(RequestError::Invalid("summary and description are both empty".into()));
    }
    let mut attachments = Vec::with_capacity(req.attachments.len());
    for (i, a) in req.attachments.into_iter().enumerate() {
        let id = a.id.unwrap_or_else(|| format!("attachment-{}", i + 1));
        let kind = a.kind.unwrap_or_else(|| {
            if id.contains('.') {
                AttachmentKind::from_locator(&id)
            } else {
                AttachmentKind::Screenshot
            }
        });
        let att = match (a.text, a.image_base64) {
            (Some(text), None) => Attachment::inline(id, text).with_kind(kind),
            (None, Some(b64)) => {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(b64.trim())
                    .map_err(|e| RequestError::Malformed(format!("attachment {id}: bad base64: {e}")))?;
                let ext = Path::new(&id).extension().and_then(|e| e.to_str()).unwrap_or("png");
                let path = scratch.join(format!("{i}.{ext}"));
                std::fs::write(&path, &bytes)
                    .map_err(|e| RequestError::Invalid(format!("attachment {id}: {e}")))?;
                Attachment { id, kind, content: Content::Path(path), content_hash: util::sha256_hex(&bytes) }
            }
            _ => {
                return Err(RequestError::Malformed(format!(
                    "attachment {id}: exactly one of `text` and `image_base64` is required"
                )))
            }
        };
        attachments.push(att);
    }
    Ok(IssueReport {
        id: req.id.unwrap_or_default(),
        summary: req.summary,
        description: req.description,
        attachments,
        assignee: String::new(),
        created_at: Utc::now(),
        status: Status::Other,
    })
}

async fn assign(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let start = Instant::now();
    if state.reloading.load(Ordering::Acquire) {
        return unavailable();
    }
    let bundle = state.current();
    let req: AssignRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    let request_id = req.id.clone();
    let scratch = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    let report = match to_report(req, scratch.path()) {
        Ok(r) => r,
        Err(RequestError::Malformed(m)) => return error(StatusCode::BAD_REQUEST, m),
        Err(RequestError::Invalid(m)) => return error(StatusCode::UNPROCESSABLE_ENTITY, m),
    };

    let routed = bundle.model.routed(&report).kind();
    let text = if routed.uses_attachments() && report.has_screenshot() {
        let _permit = state.ocr_slots.acquire().await.expect("semaphore open");
        let st = Arc::clone(&state);
        let rep = report.clone();
        let joined = tokio::task::spawn_blocking(move || {
            rep.screenshots()
                .map(|a| ocr::extract(a, st.backend.as_ref(), &st.cache).map(|r| r.text))
                .collect::<Result<Vec<_>, _>>()
                .map(|parts| parts.join("\n"))
        })
        .await
        .expect("OCR task");
        match joined {
            Ok(t) => t,
            Err(e @ OcrError::UnreadablePayload { .. }) => {
                return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
            }
            Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    } else {
        String::new()
    };
    drop(scratch);

    match bundle.model.predict(&report, &text, state.top_k) {
        Ok(mut prediction) => {
            prediction.id = request_id;
            Json(AssignResponse {
                prediction,
                latency_s: start.elapsed().as_secs_f64(),
                model_fingerprint: bundle.manifest.fingerprint.clone(),
            })
            .into_response()
        }
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    if state.reloading.load(Ordering::Acquire) {
        return unavailable();
    }
    let b = state.current();
    Json(json!({
        "status": "ok",
        "fingerprint": b.manifest.fingerprint,
        "kind": b.manifest.kind,
        "uptime_s": state.started.elapsed().as_secs_f64(),
    }))
    .into_response()
}

async fn model_info(State(state): State<Arc<AppState>>) -> Response {
    if state.reloading.load(Ordering::Acquire) {
        return unavailable();
    }
    let b = state.current();
    let subs: Vec<_> = b
        .model
        .sub_models()
        .into_iter()
        .map(|m| {
            let meta = m.linear().metadata();
            json!({
                "kind": m.kind(),
                "feature_dim": m.features().dim(),
                "classes": m.linear().classes(),
                "n_samples": meta.n_samples,
                "train_config": meta.train_config,
                "config_hash": meta.config_hash,
                "data_fingerprint": meta.data_fingerprint,
                "prep": m.prep(),
            })
        })
        .collect();
    Json(json!({
        "kind": b.manifest.kind,
        "classes": b.model.classes(),
        "fingerprint": b.manifest.fingerprint,
        "created_at": b.manifest.created_at,
        "corpus_fingerprint": b.manifest.corpus_fingerprint,
        "prep_hash": b.manifest.prep_hash,
        "sub_models": subs,
    }))
    .into_response()
}

async fn access_log(req: Request, next: Next) -> Response {
    let start = Instant::now();
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let resp = next.run(req).await;
    log::info!(
        target: "access",
        "{}",
        json!({
            "method": method.as_str(),
            "path": path,
            "status": resp.status().as_u16(),
            "latency_s": start.elapsed().as_secs_f64(),
        })
    );
    resp
}

fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/assign", post(assign))
        .route("/health", get(health))
        .route("/model", get(model_info))
        .layer(middleware::from_fn(access_log))
        .with_state(state)
}

/// A running server; dropping it without [`shutdown`](Self::shutdown)
/// leaves the server task running until the runtime stops.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    state: Arc<AppState>,
    stop: oneshot::Sender<()>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    pub fn fingerprint(&self) -> String {
        self.state.current().manifest.fingerprint.clone()
    }

    /// Reloads the bundle from disk and swaps it in. A bundle that fails its
    /// self-check leaves the current one in place.
    pub async fn reload(&self) -> Result<String, ServiceError> {
        reload(&self.state).await
    }

    pub async fn shutdown(self) -> Result<(), ServiceError> {
        let _ = self.stop.send(());
        self.task.await.expect("server task")?;
        Ok(())
    }
}

async fn reload(state: &Arc<AppState>) -> Result<String, ServiceError> {
    if state.reloading.swap(true, Ordering::AcqRel) {
        return Err(ServiceError::ReloadInProgress);
    }
    let dir = state.bundle_dir.clone();
    let loaded = tokio::task::spawn_blocking(move || load_bundle(&dir)).await.expect("load task");
    let result = match loaded {
        Ok(b) => {
            let fp = b.manifest.fingerprint.clone();
            *state.bundle.write().expect("bundle lock") = Arc::new(b);
            log::info!("reloaded bundle {fp}");
            Ok(fp)
        }
        Err(e) => {
            log::error!("reload failed, keeping current bundle: {e}");
            Err(e.into())
        }
    };
    state.reloading.store(false, Ordering::Release);
    result
}

/// Loads the bundle, binds and starts serving on the current runtime.
pub async fn start(config: ServiceConfig) -> Result<ServiceHandle, ServiceError> {
    let dir = config.bundle_dir.clone();
    let bundle = tokio::task::spawn_blocking(move || load_bundle(&dir)).await.expect("load task")?;
    let kind: ModelKind = bundle.manifest.kind;
    let backend = ocr::backend_from_spec(&config.backend)?;
    log::info!(
        "serving {kind} bundle {} from {} with OCR backend {}",
        bundle.manifest.fingerprint,
        config.bundle_dir.display(),
        backend.id()
    );
    let state = Arc::new(AppState {
        bundle: RwLock::new(Arc::new(bundle)),
        reloading: AtomicBool::new(false),
        backend,
        cache: OcrCache::in_memory(),
        ocr_slots: Semaphore::new(config.ocr_workers.max(1)),
        started: Instant::now(),
        bundle_dir: config.bundle_dir.clone(),
        top_k: config.top_k,
    });
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = oneshot::channel::<()>();
    let app = router(Arc::clone(&state));
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    Ok(ServiceHandle { addr, state, stop, task })
}

/// Runs until Ctrl-C or SIGTERM; SIGHUP reloads the bundle.
pub fn serve_blocking(config: ServiceConfig, threads: usize) -> Result<(), ServiceError> {
    let mut rt = tokio::runtime::Builder::new_multi_thread();
    if threads > 0 {
        rt.worker_threads(threads);
    }
    let rt = rt.enable_all().build()?;
    rt.block_on(async move {
        let handle = start(config).await?;
        log::info!("listening on http://{}", handle.addr);
        wait_for_signals(&handle).await?;
        handle.shutdown().await
    })
}

#[cfg(unix)]
async fn wait_for_signals(handle: &ServiceHandle) -> Result<(), ServiceError> {
    use tokio::signal::unix::{signal, SignalKind};
    let mut hup = signal(SignalKind::hangup())?;
    let mut term = signal(SignalKind::terminate())?;
    loop {
        tokio::select! {
            _ = hup.recv() => {
                let _ = handle.reload().await;
            }
            _ = term.recv() => return Ok(()),
            _ = tokio::signal::ctrl_c() => return Ok(()),
        }
    }
}

#[cfg(not(unix))]
async fn wait_for_signals(_handle: &ServiceHandle) -> Result<(), ServiceError> {
    tokio::signal::ctrl_c().await?;
    Ok(())
}
