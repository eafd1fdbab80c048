use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use base64::Engine as _;
use guiscout_core::GenConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Engine, LabelSet, SearchRequest, ServiceError};
use crate::embedder::{EmbedError, ImageInput};
use crate::genkit::{GenError, ImageOptions, UiArtifact, UiSection};

impl ServiceError {
    fn status_and_code(&self) -> (StatusCode, &'static str) {
        match self {
            ServiceError::InvalidQuery(_) => (StatusCode::BAD_REQUEST, "invalid_query"),
            ServiceError::InvalidLabels(_) => (StatusCode::BAD_REQUEST, "invalid_labels"),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ServiceError::UnknownRecord(_) => (StatusCode::NOT_FOUND, "unknown_record"),
            ServiceError::Embed(EmbedError::EmptyInput { .. }) => (StatusCode::BAD_REQUEST, "empty_input"),
            ServiceError::Embed(EmbedError::DecodeFailure { .. }) => (StatusCode::BAD_REQUEST, "decode_failure"),
            ServiceError::Embed(EmbedError::Unsupported { .. }) => (StatusCode::BAD_REQUEST, "unsupported"),
            ServiceError::Embed(_) => (StatusCode::SERVICE_UNAVAILABLE, "embedder_unavailable"),
            ServiceError::Gen(GenError::InvalidConfig(_)) => (StatusCode::BAD_REQUEST, "invalid_config"),
            ServiceError::Gen(GenError::Precondition(_)) => (StatusCode::BAD_REQUEST, "precondition"),
            ServiceError::Gen(_) => (StatusCode::BAD_GATEWAY, "upstream_failure"),
            ServiceError::GenUnavailable => (StatusCode::SERVICE_UNAVAILABLE, "generation_unavailable"),
            ServiceError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = self.status_and_code();
        let body = json!({ "error": { "code": code, "message": self.to_string() } });
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

/// Parse a JSON body, turning extractor rejections into our error shape.
fn body<T: DeserializeOwned>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

/// Run blocking engine work off the async executor.
async fn blocking<T, F>(engine: Arc<Engine>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
        .map(Json)
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/search", post(search))
        .route("/classify", post(classify))
        .route("/records/{id}", get(record))
        .route("/apps/{app_id}", get(app))
        .route("/images/{id}", get(image))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/queries", post(session_query))
        .route("/sessions/{id}/pins", post(pin))
        .route("/sessions/{id}/pins/{record_id}", delete(unpin))
        .route("/generate/refine", post(gen_refine))
        .route("/generate/code", post(gen_code))
        .route("/generate/adjust", post(gen_adjust))
        .route("/generate/images", post(gen_images))
        .with_state(engine)
}

async fn healthz(State(engine): State<Arc<Engine>>) -> Json<super::Health> {
    Json(engine.health())
}

async fn search(
    State(engine): State<Arc<Engine>>,
    payload: Result<Json<SearchRequest>, JsonRejection>,
) -> ApiResult<super::SearchResponse> {
    let req = body(payload)?;
    blocking(engine, move |e| e.search(&req)).await
}

#[derive(Deserialize)]
struct ClassifyBody {
    image_b64: String,
    labels: Vec<String>,
}

async fn classify(
    State(engine): State<Arc<Engine>>,
    payload: Result<Json<ClassifyBody>, JsonRejection>,
) -> ApiResult<super::ClassifyResponse> {
    let req = body(payload)?;
    let labels = LabelSet::new(req.labels)?;
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(req.image_b64.trim())
        .map_err(|e| ServiceError::BadRequest(format!("image_b64 is not base64: {e}")))?;
    blocking(engine, move |e| e.classify(ImageInput::Bytes(bytes), &labels)).await
}

async fn record(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult<guiscout_core::ScreenRecord> {
    blocking(engine, move |e| e.get_record(&id)).await
}

#[derive(Serialize)]
struct AppScreens {
    app_id: String,
    screens: Vec<guiscout_core::ScreenRecord>,
}

async fn app(State(engine): State<Arc<Engine>>, Path(app_id): Path<String>) -> ApiResult<AppScreens> {
    blocking(engine, move |e| Ok(AppScreens { screens: e.list_app(&app_id)?, app_id })).await
}

async fn image(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let (path, bytes) = tokio::task::spawn_blocking(move || {
        let path = engine.image_path(&id)?;
        let bytes = std::fs::read(&path)
            .map_err(|e| ServiceError::NotFound(format!("image for `{id}` unavailable: {e}")))?;
        Ok::<_, ServiceError>((path, bytes))
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;
    let mime = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], Bytes::from(bytes)).into_response())
}

async fn create_session(State(engine): State<Arc<Engine>>) -> Result<(StatusCode, Json<super::Session>), ServiceError> {
    let s = blocking(engine, |e| Ok(e.sessions().create()?)).await?;
    Ok((StatusCode::CREATED, s))
}

async fn get_session(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult<super::Session> {
    blocking(engine, move |e| Ok(e.sessions().get(&id)?)).await
}

async fn session_query(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    payload: Result<Json<SearchRequest>, JsonRejection>,
) -> ApiResult<super::SearchResponse> {
    let req = body(payload)?;
    blocking(engine, move |e| e.session_search(&id, &req)).await
}

#[derive(Deserialize)]
struct PinBody {
    record_id: String,
}

async fn pin(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    payload: Result<Json<PinBody>, JsonRejection>,
) -> ApiResult<super::Session> {
    let req = body(payload)?;
    blocking(engine, move |e| e.pin(&id, &req.record_id)).await
}

async fn unpin(
    State(engine): State<Arc<Engine>>,
    Path((id, record_id)): Path<(String, String)>,
) -> ApiResult<super::Session> {
    blocking(engine, move |e| Ok(e.sessions().unpin(&id, &record_id)?)).await
}

fn default_temperature() -> f64 {
    0.7
}

fn default_batch() -> usize {
    guiscout_core::DEFAULT_BATCH
}

fn gen_config(e: &Engine, temperature: f64, batch_size: usize) -> Result<GenConfig, ServiceError> {
    let (_, endpoint) = e.generator()?;
    let cfg = GenConfig { temperature, batch_size, endpoint: endpoint.to_string() };
    cfg.validate().map_err(|err| GenError::InvalidConfig(err.to_string()))?;
    Ok(cfg)
}

#[derive(Deserialize)]
struct RefineBody {
    high_level: String,
    #[serde(default = "default_temperature")]
    temperature: f64,
}

async fn gen_refine(
    State(engine): State<Arc<Engine>>,
    payload: Result<Json<RefineBody>, JsonRejection>,
) -> ApiResult<crate::genkit::Refinement> {
    let req = body(payload)?;
    blocking(engine, move |e| {
        let cfg = gen_config(e, req.temperature, 1)?;
        Ok(e.generator()?.0.refine_description(&req.high_level, &cfg)?)
    })
    .await
}

#[derive(Deserialize)]
struct CodeBody {
    sections: Vec<UiSection>,
    #[serde(default)]
    provenance: Vec<crate::genkit::ProvenanceStep>,
    #[serde(default = "default_temperature")]
    temperature: f64,
}

async fn gen_code(State(engine): State<Arc<Engine>>, payload: Result<Json<CodeBody>, JsonRejection>) -> ApiResult<UiArtifact> {
    let req = body(payload)?;
    blocking(engine, move |e| {
        let cfg = gen_config(e, req.temperature, 1)?;
        Ok(e.generator()?.0.generate_ui_code(&req.sections, &req.provenance, &cfg)?)
    })
    .await
}

#[derive(Deserialize)]
struct AdjustBody {
    artifact: UiArtifact,
    instruction: String,
    #[serde(default = "default_temperature")]
    temperature: f64,
}

async fn gen_adjust(
    State(engine): State<Arc<Engine>>,
    payload: Result<Json<AdjustBody>, JsonRejection>,
) -> ApiResult<UiArtifact> {
    let req = body(payload)?;
    blocking(engine, move |e| {
        let cfg = gen_config(e, req.temperature, 1)?;
        Ok(e.generator()?.0.adjust_ui_code(&req.artifact, &req.instruction, &cfg)?)
    })
    .await
}

#[derive(Deserialize)]
struct ImagesBody {
    page_description: String,
    n: usize,
    #[serde(default = "default_batch")]
    batch_size: usize,
    #[serde(default = "default_temperature")]
    temperature: f64,
    #[serde(default)]
    parallelism: Option<usize>,
}

async fn gen_images(
    State(engine): State<Arc<Engine>>,
    payload: Result<Json<ImagesBody>, JsonRejection>,
) -> ApiResult<crate::genkit::ImageBatch> {
    let req = body(payload)?;
    blocking(engine, move |e| {
        let cfg = gen_config(e, req.temperature, req.batch_size)?;
        let opts = ImageOptions { parallelism: req.parallelism.unwrap_or(1), ..ImageOptions::default() };
        Ok(e.generator()?.0.generate_ui_images(&req.page_description, req.n, &cfg, opts)?)
    })
    .await
}

/// Serve until ctrl-c, then flush sessions.
pub async fn serve(engine: Arc<Engine>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(engine.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    engine.sessions().flush().map_err(std::io::Error::other)
}
