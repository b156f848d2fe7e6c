//! Local JSON-over-HTTP service backing the interactive UI.
//!
//! | method | path               | body                                   |
//! |--------|--------------------|----------------------------------------|
//! | POST   | `/images`          | multipart upload, field `image`        |
//! | GET    | `/images/{id}`     |                                        |
//! | POST   | `/estimate`        | `{id, estimator}`                      |
//! | POST   | `/adapt`           | `{id, tau, s_max, estimator}`          |
//! | POST   | `/denoise`         | `{id, stride, k, denoiser, mode, ...}` |
//! | GET    | `/results/{id}.png`|                                        |

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pdlab::io::{decode_image, encode_png, image_dimensions};
use pdlab::{AdaptationResult, Error, Image, PdReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::ops::{self, AdaptParams, DenoiseParams, EstimateParams, MapStats, Toolkit};
use crate::store::{Bucket, Store};

/// Largest accepted image, in pixels.
pub const MAX_PIXELS: usize = 16_000_000;
/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 256 << 20;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    pub ui_dir: Option<PathBuf>,
    pub toolkit: Toolkit,
    pub timeout: Duration,
}

impl ServerConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            ui_dir: None,
            toolkit: Toolkit::default(),
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

struct AppState {
    store: Store,
    toolkit: Toolkit,
    timeout: Duration,
}

type Shared = Arc<AppState>;

/// JSON error body with an HTTP status.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what} id {id:?}"))
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message.to_string())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Unreadable { .. }
            | Error::Unwritable { .. }
            | Error::Diverged { .. }
            | Error::CorruptCheckpoint(_)
            | Error::Json(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        Self::internal(format!("image store: {e}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(cfg: ServerConfig) -> std::io::Result<Router> {
    let state = Arc::new(AppState {
        store: Store::open(&cfg.data_dir)?,
        toolkit: cfg.toolkit,
        timeout: cfg.timeout,
    });
    let api = Router::new()
        .route("/images", post(upload))
        .route("/images/{id}", get(get_image))
        .route("/estimate", post(estimate))
        .route("/adapt", post(adapt))
        .route("/denoise", post(denoise))
        .route("/results/{file}", get(get_result))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state);
    Ok(match cfg.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "no such route") }),
    })
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, cfg: ServerConfig) -> std::io::Result<()> {
    let app = router(cfg)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))
}

/// Runs a pipeline computation off the async workers under the timeout.
async fn compute<T: Send + 'static>(
    state: &AppState,
    f: impl FnOnce() -> pdlab::Result<T> + Send + 'static,
) -> ApiResult<T> {
    match tokio::time::timeout(state.timeout, tokio::task::spawn_blocking(f)).await {
        Err(_) => Err(ApiError::new(
            StatusCode::GATEWAY_TIMEOUT,
            format!("operation exceeded {} s", state.timeout.as_secs()),
        )),
        Ok(Err(join)) => Err(ApiError::internal(join)),
        Ok(Ok(result)) => Ok(result?),
    }
}

fn load_image(state: &AppState, id: &str) -> ApiResult<Image> {
    let bytes = state
        .store
        .get(Bucket::Images, id)?
        .ok_or_else(|| ApiError::not_found("image", id))?;
    Ok(decode_image(&bytes)?)
}

fn png_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UploadResponse {
    pub job_id: String,
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

async fn upload(
    State(state): State<Shared>,
    mut multipart: Multipart,
) -> ApiResult<(StatusCode, Json<UploadResponse>)> {
    let mut bytes = None;
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::new(e.status(), e.body_text()))?
    {
        if field.name() == Some("image") || field.file_name().is_some() {
            let data = field
                .bytes()
                .await
                .map_err(|e| ApiError::new(e.status(), e.body_text()))?;
            bytes = Some(data);
            break;
        }
    }
    let bytes = bytes.ok_or_else(|| ApiError::bad_request("multipart field \"image\" missing"))?;
    let (w, h) = image_dimensions(&bytes)?;
    if w * h > MAX_PIXELS {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("{w}x{h} image exceeds the {MAX_PIXELS} pixel limit"),
        ));
    }
    let img = decode_image(&bytes)?;
    let id = state.store.put(Bucket::Images, &bytes)?;
    Ok((
        StatusCode::CREATED,
        Json(UploadResponse {
            job_id: ops::job_id("upload", &id, &()),
            id,
            width: img.width(),
            height: img.height(),
            channels: img.channels(),
        }),
    ))
}

async fn get_image(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = state
        .store
        .get(Bucket::Images, &id)?
        .ok_or_else(|| ApiError::not_found("image", &id))?;
    let kind = if bytes.starts_with(b"\x89PNG") {
        "image/png"
    } else {
        "image/x-portable-anymap"
    };
    Ok(([(header::CONTENT_TYPE, kind)], bytes).into_response())
}

async fn get_result(State(state): State<Shared>, Path(file): Path<String>) -> ApiResult<Response> {
    let id = file.strip_suffix(".png").unwrap_or(&file);
    let bytes = state
        .store
        .get(Bucket::Results, id)?
        .ok_or_else(|| ApiError::not_found("result", id))?;
    Ok(png_response(bytes))
}

fn result_url(id: &str) -> String {
    format!("/results/{id}.png")
}

#[derive(Debug, Deserialize)]
struct EstimateRequest {
    id: String,
    #[serde(flatten)]
    params: EstimateParams,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EstimateResponse {
    pub job_id: String,
    pub id: String,
    /// Result id of the false-colour map visualization.
    pub map_id: String,
    pub map_url: String,
    pub stats: MapStats,
}

async fn estimate(State(state): State<Shared>, body: Bytes) -> ApiResult<Json<EstimateResponse>> {
    let req: EstimateRequest = parse_body(&body)?;
    let img = load_image(&state, &req.id)?;
    let kit = state.toolkit.clone();
    let params = req.params;
    let (png, stats) = compute(&state, move || {
        let map = ops::estimate(&img, &params, &kit)?;
        Ok((encode_png(&map.visualize())?, MapStats::of(&map)))
    })
    .await?;
    let map_id = state.store.put(Bucket::Results, &png)?;
    Ok(Json(EstimateResponse {
        job_id: ops::job_id("estimate", &req.id, &req.params),
        map_url: result_url(&map_id),
        id: req.id,
        map_id,
        stats,
    }))
}

#[derive(Debug, Deserialize)]
struct AdaptRequest {
    id: String,
    #[serde(flatten)]
    params: AdaptParams,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AdaptResponse {
    pub job_id: String,
    pub id: String,
    #[serde(flatten)]
    pub result: AdaptationResult,
}

async fn adapt(State(state): State<Shared>, body: Bytes) -> ApiResult<Json<AdaptResponse>> {
    let req: AdaptRequest = parse_body(&body)?;
    let img = load_image(&state, &req.id)?;
    let kit = state.toolkit.clone();
    let params = req.params;
    let result = compute(&state, move || ops::adapt(&img, &params, &kit)).await?;
    Ok(Json(AdaptResponse {
        job_id: ops::job_id("adapt", &req.id, &req.params),
        id: req.id,
        result,
    }))
}

#[derive(Debug, Deserialize)]
struct DenoiseRequest {
    id: String,
    #[serde(flatten)]
    params: DenoiseParams,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DenoiseResponse {
    pub job_id: String,
    pub id: String,
    pub result_id: String,
    pub result_url: String,
    pub report: PdReport,
}

async fn denoise(State(state): State<Shared>, body: Bytes) -> ApiResult<Json<DenoiseResponse>> {
    let req: DenoiseRequest = parse_body(&body)?;
    if !(0.0..=1.0).contains(&req.params.k) {
        return Err(ApiError::bad_request("k must be in [0,1]"));
    }
    let img = load_image(&state, &req.id)?;
    let kit = state.toolkit.clone();
    let params = req.params;
    let (png, report) = compute(&state, move || {
        let (out, report) = ops::denoise(&img, &params, &kit)?;
        Ok((encode_png(&out)?, report))
    })
    .await?;
    let result_id = state.store.put(Bucket::Results, &png)?;
    Ok(Json(DenoiseResponse {
        job_id: ops::job_id("denoise", &req.id, &req.params),
        id: req.id,
        result_url: result_url(&result_id),
        result_id,
        report,
    }))
}
