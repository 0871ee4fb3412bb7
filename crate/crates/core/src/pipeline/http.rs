//! JSON API over a shared [`Pipeline`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::service::{Pipeline, StageLatency};
use crate::data::EmotionLabel;
use crate::error::Error;
use crate::face::FaceImage;

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct SessionRequest {
    /// A face id from `GET /faces`, or `"random"`.
    #[serde(default)]
    pub face_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session_id: String,
    pub base_face_id: String,
    pub base_face_png: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatRequest {
    pub session_id: String,
    pub text: String,
    /// An emotion label; absent, null or `"auto"` keeps the predicted one.
    #[serde(default)]
    pub emotion_override: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub emotion: EmotionLabel,
    pub au_target: serde_json::Map<String, serde_json::Value>,
    pub face_png: String,
    pub latency_ms: StageLatency,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FaceEntry {
    pub face_id: String,
    pub model_id: String,
    pub png: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TurnView {
    pub speaker: String,
    pub text: String,
    pub emotion: EmotionLabel,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HistoryResponse {
    pub session_id: String,
    pub base_face_id: String,
    pub created_at: u64,
    pub history: Vec<TurnView>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub nlg_weights_sha256: String,
    pub nlg_vocab_hash: String,
    pub generator_sha256: String,
    pub critic_sha256: String,
    pub image_size: usize,
    pub au_names: Vec<String>,
    pub sessions: usize,
}

/// An [`Error`] rendered as `{"error": ...}` with a matching status.
#[derive(Debug)]
pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self.0 {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Validation(_)
            | Error::Label { .. }
            | Error::Expression(_)
            | Error::Data(_)
            | Error::Shape(_)
            | Error::TokenId { .. }
            | Error::Parse { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.0.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

pub fn router(pipeline: Arc<Pipeline>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/faces", get(faces))
        .route("/session", post(create_session))
        .route("/session/{id}", get(history))
        .route("/chat", post(chat))
        .with_state(pipeline)
}

/// Binds `addr`, failing fast when the port is taken.
pub async fn bind(addr: SocketAddr) -> crate::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Config(format!("cannot listen on {addr}: {e}")))
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, pipeline: Arc<Pipeline>) -> crate::Result<()> {
    axum::serve(listener, router(pipeline))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Config(format!("server stopped: {e}")))
}

pub fn png_base64(image: &FaceImage) -> String {
    BASE64.encode(image.encode_png())
}

pub fn decode_png_base64(s: &str) -> crate::Result<FaceImage> {
    let bytes = BASE64
        .decode(s)
        .map_err(|e| Error::Image(format!("invalid base64: {e}")))?;
    FaceImage::decode_png(&bytes)
}

fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    parse_required(body)
}

fn parse_required<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(Error::Validation(format!("request body: {e}"))))
}

/// Runs model work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> crate::Result<T> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::Config(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

async fn health(State(p): State<Arc<Pipeline>>) -> Json<HealthResponse> {
    let nlg = &p.nlg().manifest;
    let face = &p.face_checkpoint().manifest;
    Json(HealthResponse {
        status: "ok".into(),
        nlg_weights_sha256: nlg.weights_sha256.clone(),
        nlg_vocab_hash: nlg.vocab_hash.clone(),
        generator_sha256: face.generator_sha256.clone(),
        critic_sha256: face.critic_sha256.clone(),
        image_size: face.image_size,
        au_names: face.au_names.clone(),
        sessions: p.sessions().len(),
    })
}

async fn faces(State(p): State<Arc<Pipeline>>) -> Json<Vec<FaceEntry>> {
    Json(
        p.base_faces()
            .iter()
            .map(|f| FaceEntry {
                face_id: f.face_id.clone(),
                model_id: f.model_id.clone(),
                png: png_base64(&f.image),
            })
            .collect(),
    )
}

async fn create_session(State(p): State<Arc<Pipeline>>, body: Bytes) -> ApiResult<SessionResponse> {
    let req: SessionRequest = parse_body(&body)?;
    let session = blocking(move || p.create_session(req.face_id.as_deref())).await?;
    Ok(Json(SessionResponse {
        base_face_png: png_base64(&session.base_face),
        session_id: session.session_id,
        base_face_id: session.base_face_id,
    }))
}

async fn history(State(p): State<Arc<Pipeline>>, Path(id): Path<String>) -> ApiResult<HistoryResponse> {
    let handle = p.sessions().get(&id)?;
    let s = handle.lock().expect("session poisoned");
    Ok(Json(HistoryResponse {
        session_id: s.session_id.clone(),
        base_face_id: s.base_face_id.clone(),
        created_at: s.created_at,
        history: s
            .history
            .iter()
            .map(|t| TurnView {
                speaker: t.speaker_id.clone(),
                text: t.text.clone(),
                emotion: t.emotion,
            })
            .collect(),
    }))
}

async fn chat(State(p): State<Arc<Pipeline>>, body: Bytes) -> ApiResult<ChatResponse> {
    let req: ChatRequest = parse_required(&body)?;
    let emotion_override = match req.emotion_override.as_deref().map(str::trim) {
        None | Some("") | Some("auto") => None,
        Some(e) => Some(e.parse::<EmotionLabel>()?),
    };
    let reply = blocking(move || p.respond(&req.session_id, &req.text, emotion_override)).await?;
    Ok(Json(ChatResponse {
        face_png: png_base64(&reply.face),
        au_target: reply.au_target.to_named(),
        text: reply.text,
        emotion: reply.emotion,
        latency_ms: reply.latency_ms,
    }))
}
