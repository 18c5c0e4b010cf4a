//! HTTP inference service.
//!
//! | route            | body                  | reply                                  |
//! |------------------|-----------------------|----------------------------------------|
//! | `GET /health`    |                       | `{"ready", "model_id"}`                |
//! | `GET /emotions`  |                       | `{"emotions": [names in model order]}` |
//! | `POST /generate` | [`GenerationRequest`] | [`GenerationResponse`]                 |
//! | `POST /preview`  | [`PreviewRequest`]    | [`PreviewResponse`]                    |
//!
//! Images travel as base64-encoded PNG. Request images are center-cropped and
//! resized to the model input size here. Errors reply `{"error": message}` with
//! 400 for bad input, 413 for oversized bodies and 503 until a model is loaded.

use std::future::IntoFuture;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::data::{fit_to_input, FrameImage};
use crate::model::{load_params, ActionVector, Generator};
use crate::synthesis::{render, ScheduleSpec};
use crate::{Error, Result};

pub const DEFAULT_BODY_LIMIT: usize = 8 * 1024 * 1024;

/// A loaded generator with the identifier reported to clients.
#[derive(Debug)]
pub struct LoadedModel {
    pub id: String,
    pub generator: Generator,
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self> {
        let (generator, _) = load_params(path)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        Ok(Self { id, generator })
    }
}

/// Shared service state. The model slot is replaced as a whole, so requests
/// already running keep the snapshot they started with.
#[derive(Debug, Clone)]
pub struct ServiceState {
    model: Arc<RwLock<Option<Arc<LoadedModel>>>>,
    body_limit: usize,
}

impl Default for ServiceState {
    fn default() -> Self {
        Self::empty(DEFAULT_BODY_LIMIT)
    }
}

impl ServiceState {
    pub fn empty(body_limit: usize) -> Self {
        Self {
            model: Arc::new(RwLock::new(None)),
            body_limit,
        }
    }

    pub fn with_model(model: LoadedModel, body_limit: usize) -> Self {
        let s = Self::empty(body_limit);
        s.install(model);
        s
    }

    pub fn install(&self, model: LoadedModel) {
        *self.model.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(model));
    }

    pub fn current(&self) -> Option<Arc<LoadedModel>> {
        self.model.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRequest {
    /// Base64 PNG.
    pub image: String,
    pub schedule: ScheduleSpec,
    /// Must equal the served model id when given.
    #[serde(default)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub model_id: String,
    /// Base64 PNG frames in schedule order.
    pub frames: Vec<String>,
    pub landmarks: Vec<Vec<[f64; 2]>>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewRequest {
    pub image: String,
    pub action: Vec<f64>,
    #[serde(default)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewResponse {
    pub model_id: String,
    pub frame: String,
    pub landmarks: Vec<[f64; 2]>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub ready: bool,
    pub model_id: Option<String>,
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Tensor(_) | Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn model_for(state: &ServiceState, requested: &Option<String>) -> std::result::Result<Arc<LoadedModel>, ApiError> {
    let model = state
        .current()
        .ok_or_else(|| ApiError(StatusCode::SERVICE_UNAVAILABLE, "model is still loading".into()))?;
    if let Some(id) = requested {
        if *id != model.id {
            return Err(bad_request(format!("unknown model {id:?}; serving {:?}", model.id)));
        }
    }
    Ok(model)
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &Bytes) -> std::result::Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| bad_request(format!("invalid request: {e}")))
}

fn decode_image(b64: &str, size: usize) -> std::result::Result<FrameImage, ApiError> {
    let bytes = BASE64
        .decode(b64.trim())
        .map_err(|e| bad_request(format!("image is not base64: {e}")))?;
    let frame = FrameImage::decode_png(&bytes).map_err(|e| bad_request(format!("undecodable image: {e}")))?;
    Ok(fit_to_input(&frame, size)?)
}

fn encode_frame(frame: &FrameImage) -> Result<String> {
    Ok(BASE64.encode(frame.encode_png()?))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> std::result::Result<T, ApiError> + Send + 'static,
) -> std::result::Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn health(State(state): State<ServiceState>) -> Json<Health> {
    let model = state.current();
    Json(Health {
        ready: model.is_some(),
        model_id: model.map(|m| m.id.clone()),
    })
}

async fn emotions(State(state): State<ServiceState>) -> std::result::Result<Response, ApiError> {
    let model = model_for(&state, &None)?;
    Ok(Json(serde_json::json!({ "emotions": model.generator.config().emotions.names() })).into_response())
}

async fn generate(State(state): State<ServiceState>, body: Bytes) -> std::result::Result<Json<GenerationResponse>, ApiError> {
    let req: GenerationRequest = parse_json(&body)?;
    let model = model_for(&state, &req.model)?;
    blocking(move || {
        let started = Instant::now();
        let g = &model.generator;
        let schedule = req.schedule.build(&g.config().emotions)?;
        let image = decode_image(&req.image, g.config().input_size)?;
        let seq = render(g, &image, &schedule)?;
        Ok(GenerationResponse {
            model_id: model.id.clone(),
            frames: seq.frames.iter().map(encode_frame).collect::<Result<_>>()?,
            landmarks: seq.landmarks.iter().map(|l| l.points().to_vec()).collect(),
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    })
    .await
    .map(Json)
}

async fn preview(State(state): State<ServiceState>, body: Bytes) -> std::result::Result<Json<PreviewResponse>, ApiError> {
    let req: PreviewRequest = parse_json(&body)?;
    let model = model_for(&state, &req.model)?;
    blocking(move || {
        let started = Instant::now();
        let g = &model.generator;
        let a = ActionVector::new(req.action)?;
        if a.len() != g.n_emotions() {
            return Err(bad_request(format!(
                "action has {} entries, model has {} emotions",
                a.len(),
                g.n_emotions()
            )));
        }
        let image = decode_image(&req.image, g.config().input_size)?;
        let out = g.generate_frame(&image, &a)?;
        Ok(PreviewResponse {
            model_id: model.id.clone(),
            frame: encode_frame(&out.frame)?,
            landmarks: out.landmarks.points().to_vec(),
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    })
    .await
    .map(Json)
}

pub fn router(state: ServiceState) -> Router {
    let limit = state.body_limit;
    Router::new()
        .route("/health", get(health))
        .route("/emotions", get(emotions))
        .route("/generate", post(generate))
        .route("/preview", post(preview))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Binds `addr`, starts answering immediately, and loads `checkpoint` in the
/// background; model routes reply 503 until it is ready. Runs until Ctrl-C.
pub async fn serve(checkpoint: PathBuf, addr: SocketAddr, body_limit: usize) -> Result<()> {
    let state = ServiceState::empty(body_limit);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(format!("bind {addr}"), e))?;
    log::info!("listening on {}", listener.local_addr().map_err(|e| Error::io("listener", e))?);
    let loader = state.clone();
    let loading = tokio::task::spawn_blocking(move || -> Result<()> {
        let model = LoadedModel::load(&checkpoint)?;
        log::info!("loaded model {}", model.id);
        loader.install(model);
        Ok(())
    });
    let app = router(state);
    let server = axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .into_future();
    tokio::pin!(server);
    tokio::select! {
        r = &mut server => return r.map_err(|e| Error::io("http server", e)),
        r = loading => match r {
            Ok(Ok(())) => {}
            Ok(Err(e)) => return Err(e),
            Err(e) => return Err(Error::Invalid(e.to_string())),
        },
    }
    server.await.map_err(|e| Error::io("http server", e))
}
