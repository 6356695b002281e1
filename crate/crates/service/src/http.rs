//! HTTP routes and the live frame WebSocket.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::broadcast::error::RecvError;
use wrapped_haptics::teaching::FeedbackFrame;

use crate::error::ServiceError;
use crate::experiments::{CreateExperiment, SubmitResponse};
use crate::service::{CreateSession, ExportFormat, Service};
use crate::sessions::SampleBatch;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::State(_) => StatusCode::CONFLICT,
            ServiceError::Invalid(_) | ServiceError::Json(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Core(e) => match e {
                wrapped_haptics::Error::State(_) => StatusCode::CONFLICT,
                wrapped_haptics::Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            },
            ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult = Result<Response, ServiceError>;

/// Run blocking service work off the async executor.
async fn blocking<T, F>(service: &Arc<Service>, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    let service = service.clone();
    tokio::task::spawn_blocking(move || f(&service)).await.map_err(|e| ServiceError::Io(std::io::Error::other(e)))?
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/samples", post(stream_demo))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/frames", get(frames))
        .route("/experiments", post(create_experiment))
        .route("/experiments/{id}", get(get_experiment))
        .route("/experiments/{id}/responses", post(submit_response))
        .route("/export/{id}", get(export))
        .with_state(service)
}

async fn create_session(State(s): State<Arc<Service>>, Json(req): Json<CreateSession>) -> ApiResult {
    let handle = blocking(&s, move |s| s.create_session(&req)).await?;
    Ok((StatusCode::CREATED, Json(handle)).into_response())
}

async fn get_session(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(blocking(&s, move |s| s.session(&id)).await?).into_response())
}

async fn stream_demo(
    State(s): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(batch): Json<SampleBatch>,
) -> ApiResult {
    Ok(Json(blocking(&s, move |s| s.stream_demo(&id, &batch)).await?).into_response())
}

async fn metrics(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(blocking(&s, move |s| s.metrics(&id)).await?).into_response())
}

async fn create_experiment(State(s): State<Arc<Service>>, Json(req): Json<CreateExperiment>) -> ApiResult {
    let view = blocking(&s, move |s| s.create_experiment(&req)).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_experiment(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(blocking(&s, move |s| s.experiment(&id)).await?).into_response())
}

async fn submit_response(
    State(s): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(req): Json<SubmitResponse>,
) -> ApiResult {
    Ok(Json(blocking(&s, move |s| s.submit_response(&id, &req)).await?).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: String,
}

async fn export(State(s): State<Arc<Service>>, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> ApiResult {
    let format: ExportFormat = q.format.parse()?;
    let body = blocking(&s, move |s| s.export(&id, format)).await?;
    let content_type = match format {
        ExportFormat::Csv => "text/csv",
        ExportFormat::Jsonl => "application/x-ndjson",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], body).into_response())
}

/// Haptic frames go out in the display's frame schema, GUI frames as
/// `{t, percent}`.
pub fn frame_json(frame: &FeedbackFrame) -> String {
    let value = match frame {
        FeedbackFrame::Haptic(f) => serde_json::to_string(f),
        FeedbackFrame::Gui { t, percent } => serde_json::to_string(&serde_json::json!({ "t": t, "percent": percent })),
    };
    value.expect("frames serialize")
}

async fn frames(State(s): State<Arc<Service>>, Path(id): Path<String>, ws: WebSocketUpgrade) -> ApiResult {
    let rx = blocking(&s, move |s| s.subscribe(&id)).await?;
    Ok(ws.on_upgrade(move |socket| forward_frames(socket, rx)))
}

async fn forward_frames(mut socket: WebSocket, mut rx: tokio::sync::broadcast::Receiver<FeedbackFrame>) {
    loop {
        tokio::select! {
            frame = rx.recv() => match frame {
                Ok(f) => {
                    if socket.send(Message::Text(frame_json(&f).into())).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return,
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

/// Bind and serve until the process is stopped.
pub async fn serve(service: Arc<Service>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service)).await
}
