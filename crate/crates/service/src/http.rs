//! JSON-over-HTTP front end for remote registration and verification.
//!
//! | method | path       | body                                   | success |
//! |--------|------------|----------------------------------------|---------|
//! | POST   | `/devices` | `{device_id, features, devfing_key?}`  | 201     |
//! | GET    | `/devices` |                                        | 200     |
//! | POST   | `/verify`  | multipart PNG part, or `{image_base64}` | 200     |
//! | GET    | `/healthz` |                                        | 200     |
//!
//! Verdicts, including `NoWatermark` and `Tampered`, are always 200.

use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use chrono::{DateTime, Utc};
use provmark_core::devfing::parse_bits;
use provmark_core::{DeviceFeatureSet, PreSharedKey, RasterImage};
use serde::Serialize;
use serde_json::{json, Value};

use crate::pipeline::{plan_for, verify_image, Tolerances, VerificationReport};
use crate::registry::{Registry, RegistryError, RegistryRecord};

pub const DEFAULT_MAX_IMAGE_BYTES: usize = 32 * 1024 * 1024;

#[derive(Debug, Clone, Copy)]
pub struct ServiceConfig {
    pub delta: f64,
    pub tolerances: Tolerances,
    pub max_image_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            delta: provmark_core::watermark::DEFAULT_DELTA,
            tolerances: Tolerances::default(),
            max_image_bytes: DEFAULT_MAX_IMAGE_BYTES,
        }
    }
}

struct Inner {
    registry: Registry,
    key: PreSharedKey,
    config: ServiceConfig,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(registry: Registry, key: PreSharedKey, config: ServiceConfig) -> Self {
        Self(Arc::new(Inner {
            registry,
            key,
            config,
        }))
    }

    pub fn registry(&self) -> &Registry {
        &self.0.registry
    }
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Conflict(String),
    TooLarge(usize),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::TooLarge(cap) => (
                StatusCode::PAYLOAD_TOO_LARGE,
                format!("image exceeds the {cap}-byte limit"),
            ),
            ApiError::Internal(m) => {
                log::error!("{m}");
                (StatusCode::INTERNAL_SERVER_ERROR, m)
            }
        };
        (status, Json(json!({ "error": msg }))).into_response()
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::DuplicateDevice(_) | RegistryError::DuplicateFingerprint(_) => {
                ApiError::Conflict(e.to_string())
            }
            RegistryError::EmptyDeviceId => ApiError::BadRequest(e.to_string()),
            RegistryError::CorruptRecord { .. }
            | RegistryError::ReadOnly
            | RegistryError::Io(_) => {
                ApiError::Internal(e.to_string())
            }
        }
    }
}

pub fn router(state: AppState) -> Router {
    // Leave room for base64 expansion and multipart framing; the exact cap
    // is enforced on the decoded image.
    let body_limit = state.0.config.max_image_bytes / 3 * 4 + 64 * 1024;
    Router::new()
        .route("/devices", post(register_device).get(list_devices))
        .route("/verify", post(verify))
        .route("/healthz", get(|| async { "ok" }))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Serialize)]
struct Registered {
    device_id: String,
    fingerprint: String,
}

#[derive(Serialize)]
struct DeviceSummary {
    device_id: String,
    fingerprint: String,
    enrolled_at: DateTime<Utc>,
}

fn body_bytes_rejection(status: StatusCode, text: String, cap: usize) -> ApiError {
    if status == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::TooLarge(cap)
    } else {
        ApiError::BadRequest(text)
    }
}

async fn register_device(
    State(state): State<AppState>,
    req: Request,
) -> Result<(StatusCode, Json<Registered>), ApiError> {
    let cap = state.0.config.max_image_bytes;
    let body = axum::body::Bytes::from_request(req, &state)
        .await
        .map_err(|r| body_bytes_rejection(r.status(), r.body_text(), cap))?;
    let doc: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::BadRequest(format!("malformed JSON: {e}")))?;
    let device_id = doc
        .get("device_id")
        .and_then(Value::as_str)
        .ok_or_else(|| ApiError::BadRequest("device_id must be a string".into()))?
        .to_string();
    let features = doc
        .get("features")
        .ok_or_else(|| ApiError::BadRequest("features missing".into()))?;
    let features =
        DeviceFeatureSet::from_json_value(features).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let mut record = RegistryRecord::new(device_id, features.fingerprint());
    match doc.get("devfing_key") {
        None | Some(Value::Null) => {}
        Some(Value::String(bits)) => {
            parse_bits(bits).map_err(|e| ApiError::BadRequest(format!("devfing_key: {e}")))?;
            record = record.with_devfing_key(bits.clone());
        }
        Some(_) => return Err(ApiError::BadRequest("devfing_key must be a bit string".into())),
    }

    let st = state.clone();
    let stored = tokio::task::spawn_blocking(move || st.registry().insert(record))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok((
        StatusCode::CREATED,
        Json(Registered {
            device_id: stored.device_id,
            fingerprint: stored.fingerprint.to_string(),
        }),
    ))
}

async fn list_devices(State(state): State<AppState>) -> Json<Vec<DeviceSummary>> {
    Json(
        state
            .registry()
            .records()
            .into_iter()
            .map(|r| DeviceSummary {
                device_id: r.device_id,
                fingerprint: r.fingerprint.to_string(),
                enrolled_at: r.enrolled_at,
            })
            .collect(),
    )
}

async fn image_from_multipart(mut mp: Multipart, cap: usize) -> Result<Vec<u8>, ApiError> {
    let bad = |e: axum::extract::multipart::MultipartError| {
        body_bytes_rejection(e.status(), e.body_text(), cap)
    };
    while let Some(mut field) = mp.next_field().await.map_err(bad)? {
        let is_image = field.name() == Some("image")
            || field.content_type().is_some_and(|t| t == "image/png")
            || field.file_name().is_some();
        if !is_image {
            continue;
        }
        let mut data = Vec::new();
        while let Some(chunk) = field.chunk().await.map_err(bad)? {
            if data.len() + chunk.len() > cap {
                return Err(ApiError::TooLarge(cap));
            }
            data.extend_from_slice(&chunk);
        }
        return Ok(data);
    }
    Err(ApiError::BadRequest("multipart body has no image part".into()))
}

async fn image_from_json(req: Request, state: &AppState, cap: usize) -> Result<Vec<u8>, ApiError> {
    let body = axum::body::Bytes::from_request(req, state)
        .await
        .map_err(|r| body_bytes_rejection(r.status(), r.body_text(), cap))?;
    let doc: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::BadRequest(format!("malformed JSON: {e}")))?;
    let b64 = doc
        .get("image_base64")
        .and_then(Value::as_str)
        .ok_or_else(|| ApiError::BadRequest("image_base64 must be a string".into()))?;
    let data = base64::engine::general_purpose::STANDARD
        .decode(b64.trim())
        .map_err(|e| ApiError::BadRequest(format!("image_base64: {e}")))?;
    if data.len() > cap {
        return Err(ApiError::TooLarge(cap));
    }
    Ok(data)
}

async fn verify(
    State(state): State<AppState>,
    req: Request,
) -> Result<Json<VerificationReport>, ApiError> {
    let cap = state.0.config.max_image_bytes;
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let png = if is_multipart {
        let mp = Multipart::from_request(req, &state)
            .await
            .map_err(|r| ApiError::BadRequest(r.body_text()))?;
        image_from_multipart(mp, cap).await?
    } else {
        image_from_json(req, &state, cap).await?
    };

    let st = state.clone();
    let report = tokio::task::spawn_blocking(move || -> Result<VerificationReport, ApiError> {
        let img = RasterImage::decode_png(&png).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let inner = &st.0;
        let plan = plan_for(&img, inner.config.delta).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let Some(plan) = plan else {
            return Ok(VerificationReport::no_watermark("image too small to carry a frame"));
        };
        verify_image(&img, &inner.key, &plan, &inner.registry, inner.config.tolerances)
            .map_err(|e| ApiError::BadRequest(e.to_string()))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(report))
}
