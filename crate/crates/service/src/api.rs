//! HTTP+JSON routes over [`Service`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::service::Service;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

pub struct ApiError(EngineError);

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        Self(e)
    }
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match &self.0 {
            EngineError::Validation { .. } => StatusCode::BAD_REQUEST,
            EngineError::Conflict { .. } => StatusCode::CONFLICT,
            EngineError::UnknownSession(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        let body = ErrorBody {
            code: self.0.code().to_string(),
            message: self.0.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| {
        ApiError(EngineError::Validation {
            code: "MALFORMED_BODY",
            message: e.to_string(),
        })
    })
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    annotator_id: String,
    consent: bool,
}

#[derive(Debug, Deserialize)]
struct Judgment {
    scenario_id: String,
    score: serde_json::Number,
}

#[derive(Debug, Deserialize)]
struct ModalityBody {
    scenario_id: String,
    modality: String,
}

#[derive(Debug, Deserialize)]
struct ScenarioBody {
    image_id: String,
    text: String,
}

/// Integral JSON numbers only; `4.0` counts, `4.5` does not.
fn integral(n: &serde_json::Number) -> ApiResult<i64> {
    if let Some(i) = n.as_i64() {
        return Ok(i);
    }
    match n.as_f64() {
        Some(f) if f.fract() == 0.0 && f.abs() < 1e15 => Ok(f as i64),
        _ => Err(ApiError(EngineError::Validation {
            code: "INVALID_SCORE",
            message: format!("score must be an integer in 1..=5, got {n}"),
        })),
    }
}

async fn create_session(
    State(svc): State<Arc<Service>>,
    bytes: Bytes,
) -> ApiResult<impl IntoResponse> {
    let req: CreateSession = body(&bytes)?;
    let view = svc.create_session(&req.annotator_id, req.consent)?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.session(&id)?))
}

async fn next_task(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.next_task(&id)?))
}

async fn judgment(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<impl IntoResponse> {
    let req: Judgment = body(&bytes)?;
    let score = integral(&req.score)?;
    Ok(Json(svc.submit_judgment(&id, &req.scenario_id, score)?))
}

async fn modality(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<impl IntoResponse> {
    let req: ModalityBody = body(&bytes)?;
    Ok(Json(svc.submit_modality(
        &id,
        &req.scenario_id,
        &req.modality,
    )?))
}

async fn scenario(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<impl IntoResponse> {
    let req: ScenarioBody = body(&bytes)?;
    let reply = svc.submit_scenario(&id, &req.image_id, &req.text)?;
    Ok((StatusCode::CREATED, Json(reply)))
}

async fn export(State(svc): State<Arc<Service>>) -> impl IntoResponse {
    (
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        svc.export_jsonl(),
    )
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next", get(next_task))
        .route("/sessions/{id}/judgments", post(judgment))
        .route("/sessions/{id}/modality", post(modality))
        .route("/sessions/{id}/scenarios", post(scenario))
        .route("/export", get(export))
        .with_state(service)
}
