//! HTTP API over a [`SessionHub`]. Payloads are described in
//! `api-schema.json` at the crate root.
//!
//! | Method | Path | Response |
//! |---|---|---|
//! | POST | `/sessions` | 201, `SessionView` |
//! | GET | `/sessions/{id}` | `SessionView` |
//! | POST | `/sessions/{id}/messages` | `TurnResponse` |
//! | POST | `/sessions/{id}/close` | `SessionView` |
//! | GET | `/sessions/{id}/transcript` | NDJSON of `TurnRecord` |
//! | GET | `/sessions/{id}/events` | NDJSON stream of `StreamEvent` |
//!
//! Errors are `{"code": ..., "message": ...}` with a stable `code`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use emotalk_core::behavior::ScriptElement;
use emotalk_core::orchestrator::{SessionError, SessionHub, SessionOptions, SessionState, SessionView, TurnRecord};

pub const NDJSON: &str = "application/x-ndjson";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub turn: TurnRecord,
    pub session: SessionView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

/// One line of the per-session event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamEvent {
    Element {
        index: u32,
        seq: usize,
        element: ScriptElement,
    },
    TurnCompleted {
        index: u32,
        session: SessionView,
    },
    TurnFailed {
        code: String,
        message: String,
    },
    SessionClosed {
        session: SessionView,
    },
}

pub struct ApiState {
    hub: Arc<SessionHub>,
    streams: Mutex<HashMap<String, broadcast::Sender<StreamEvent>>>,
}

impl ApiState {
    pub fn new(hub: Arc<SessionHub>) -> Arc<Self> {
        Arc::new(Self {
            hub,
            streams: Mutex::new(HashMap::new()),
        })
    }

    pub fn hub(&self) -> &SessionHub {
        &self.hub
    }

    fn sender(&self, id: &str) -> broadcast::Sender<StreamEvent> {
        self.streams
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(id.to_string())
            .or_insert_with(|| broadcast::channel(256).0)
            .clone()
    }

    fn publish(&self, id: &str, events: impl IntoIterator<Item = StreamEvent>) {
        let sender = self.sender(id);
        for event in events {
            // no subscribers is fine
            let _ = sender.send(event);
        }
    }
}

pub fn router(state: Arc<ApiState>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(serde_json::json!({"status": "ok"})) }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/close", post(close_session))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .route("/sessions/{id}/events", get(get_events))
        .with_state(state)
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                code: "BadRequest".into(),
                message: message.into(),
            },
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(err: SessionError) -> Self {
        let status = match &err {
            SessionError::Config(_) | SessionError::EmptyInput => StatusCode::BAD_REQUEST,
            SessionError::SessionClosed | SessionError::SessionBusy => StatusCode::CONFLICT,
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::LlmUnavailable { .. } | SessionError::LlmProtocol(_) => StatusCode::BAD_GATEWAY,
            SessionError::Prompt(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self {
            status,
            body: ErrorBody {
                code: err.code().into(),
                message: err.to_string(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

async fn create_session(State(state): State<Arc<ApiState>>, body: Bytes) -> Result<Response, ApiError> {
    let options: SessionOptions = parse_body(&body)?;
    let view = state.hub.create(options)?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(
    State(state): State<Arc<ApiState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(state.hub.view(&id)?))
}

async fn post_message(
    State(state): State<Arc<ApiState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<TurnResponse>, ApiError> {
    let request: MessageRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("expected {{\"text\": ...}}: {e}")))?;
    let hub = state.hub.clone();
    let step_id = id.clone();
    let result = tokio::task::spawn_blocking(move || hub.step(&step_id, &request.text))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody {
                code: "Internal".into(),
                message: e.to_string(),
            },
        })?;

    let turn = match result {
        Ok(turn) => turn,
        Err(err) => {
            if matches!(err, SessionError::LlmUnavailable { .. } | SessionError::LlmProtocol(_)) {
                state.publish(
                    &id,
                    [StreamEvent::TurnFailed {
                        code: err.code().into(),
                        message: err.to_string(),
                    }],
                );
            }
            return Err(err.into());
        }
    };
    let session = state.hub.view(&id)?;
    let mut events: Vec<StreamEvent> = turn
        .script
        .elements
        .iter()
        .enumerate()
        .map(|(seq, element)| StreamEvent::Element {
            index: turn.index,
            seq,
            element: element.clone(),
        })
        .collect();
    events.push(StreamEvent::TurnCompleted {
        index: turn.index,
        session: session.clone(),
    });
    if session.state == SessionState::Closed {
        events.push(StreamEvent::SessionClosed {
            session: session.clone(),
        });
    }
    state.publish(&id, events);
    Ok(Json(TurnResponse { turn, session }))
}

async fn close_session(
    State(state): State<Arc<ApiState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let was_open = state.hub.view(&id)?.state == SessionState::Open;
    let view = state.hub.close(&id)?;
    if was_open {
        state.publish(&id, [StreamEvent::SessionClosed { session: view.clone() }]);
    }
    Ok(Json(view))
}

fn ndjson_line<T: Serialize>(value: &T) -> String {
    let mut line = serde_json::to_string(value).expect("plain data serializes");
    line.push('\n');
    line
}

async fn get_transcript(State(state): State<Arc<ApiState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let body: String = state.hub.transcript(&id)?.iter().map(ndjson_line).collect();
    Ok(([(header::CONTENT_TYPE, NDJSON)], body).into_response())
}

fn event_stream(
    rx: broadcast::Receiver<StreamEvent>,
    already_closed: Option<SessionView>,
) -> impl Stream<Item = Result<String, std::convert::Infallible>> {
    enum Phase {
        Live(broadcast::Receiver<StreamEvent>),
        Done,
    }
    let start = match already_closed {
        Some(session) => {
            return stream::iter(vec![Ok(ndjson_line(&StreamEvent::SessionClosed { session }))]).left_stream();
        }
        None => Phase::Live(rx),
    };
    stream::unfold(start, |phase| async move {
        let Phase::Live(mut rx) = phase else {
            return None;
        };
        loop {
            match rx.recv().await {
                Ok(event) => {
                    let next = if matches!(event, StreamEvent::SessionClosed { .. }) {
                        Phase::Done
                    } else {
                        Phase::Live(rx)
                    };
                    return Some((Ok(ndjson_line(&event)), next));
                }
                Err(broadcast::error::RecvError::Lagged(skipped)) => {
                    tracing::warn!(skipped, "event stream subscriber lagged");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    })
    .right_stream()
}

async fn get_events(State(state): State<Arc<ApiState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    // subscribe before reading state so no event falls in between
    let rx = state.sender(&id).subscribe();
    let view = state.hub.view(&id)?;
    let closed = (view.state == SessionState::Closed).then_some(view);
    let body = Body::from_stream(event_stream(rx, closed));
    Ok(([(header::CONTENT_TYPE, NDJSON)], body).into_response())
}

/// Serves until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<ApiState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
