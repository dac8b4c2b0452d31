use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use futures::StreamExt;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use emotalk::api::{router, ApiState};
use emotalk::commands::{chat_loop, ChatOptions};
use emotalk_core::emotion::LexiconClassifier;
use emotalk_core::orchestrator::{
    CannedLlm, Engine, LlmClient, LlmError, RetryPolicy, ScriptedLlm, SessionConfig, SessionHub, StepClock,
};

fn schema_for(def: &str) -> jsonschema::Validator {
    let mut schema: Value = serde_json::from_str(include_str!("../api-schema.json")).unwrap();
    schema["$ref"] = json!(format!("#/$defs/{def}"));
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(def: &str, value: &Value) {
    let validator = schema_for(def);
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{def} invalid: {errors:?}\n{value:#}");
}

#[test]
fn schema_rejects_malformed_payloads() {
    assert!(!schema_for("Error").is_valid(&json!({"code": "Nope", "message": ""})));
    assert!(!schema_for("ScriptElement").is_valid(&json!({"kind": "speech", "text": "hi", "genre": "loud"})));
    assert!(schema_for("ScriptElement").is_valid(&json!({"kind": "action", "routine": "happy", "emoji": "😊"})));
}

fn app_with(engine: Engine, config: SessionConfig) -> (Router, Arc<ApiState>) {
    let state = ApiState::new(Arc::new(SessionHub::new(engine, config)));
    (router(state.clone()), state)
}

fn canned_app() -> Router {
    let engine = Engine::new(
        Arc::new(LexiconClassifier::shipped()),
        LlmClient::new(Arc::new(CannedLlm)),
    );
    app_with(engine, SessionConfig::default()).0
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String, Option<String>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap(), ctype)
}

fn json_of(body: &str) -> Value {
    serde_json::from_str(body).unwrap_or_else(|e| panic!("{e}: {body}"))
}

#[tokio::test]
async fn create_and_talk_with_mock_llm() {
    let app = canned_app();
    let (status, body, _) = call(&app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    let view = json_of(&body);
    assert_valid("SessionView", &view);
    assert_eq!(view["state"], "open");
    assert_eq!(view["turn_limit"], 11);
    let id = view["id"].as_str().unwrap().to_string();

    let (status, body, _) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/messages"),
        Some(json!({"text": "hello"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let resp = json_of(&body);
    assert_valid("TurnResponse", &resp);
    assert_eq!(resp["turn"]["index"], 1);
    assert_eq!(resp["turn"]["human_text"], "hello");
    assert!(!resp["turn"]["script"].as_array().unwrap().is_empty());
    assert_eq!(resp["session"]["turn_count"], 1);

    let (status, body, _) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json_of(&body)["last_script"], resp["turn"]["script"]);
}

#[tokio::test]
async fn closed_session_rejects_messages() {
    let app = canned_app();
    let (_, body, _) = call(&app, Method::POST, "/sessions", Some(json!({"id": "s1"}))).await;
    assert_eq!(json_of(&body)["id"], "s1");
    let (status, body, _) = call(&app, Method::POST, "/sessions/s1/close", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json_of(&body)["state"], "closed");

    let (status, body, _) = call(&app, Method::POST, "/sessions/s1/messages", Some(json!({"text": "hi"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let err = json_of(&body);
    assert_valid("Error", &err);
    assert_eq!(err["code"], "SessionClosed");
}

#[tokio::test]
async fn error_codes() {
    let app = canned_app();
    let (status, body, _) = call(&app, Method::GET, "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["code"], "SessionNotFound");

    let (status, body, _) = call(&app, Method::POST, "/sessions", Some(json!({"turn_limit": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["code"], "ConfigError");

    let (status, body, _) = call(&app, Method::POST, "/sessions", Some(json!({"colour": "red"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["code"], "BadRequest");

    call(&app, Method::POST, "/sessions", Some(json!({"id": "x"}))).await;
    let (status, _, _) = call(&app, Method::POST, "/sessions", Some(json!({"id": "x"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body, _) = call(&app, Method::POST, "/sessions/x/messages", Some(json!({"text": "   "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["code"], "EmptyInput");

    let (status, body, _) = call(&app, Method::POST, "/sessions/x/messages", Some(json!({"txt": "hi"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_valid("Error", &json_of(&body));
}

struct Down;

impl emotalk_core::orchestrator::LlmBackend for Down {
    fn complete(&self, _: &emotalk_core::orchestrator::CompletionRequest<'_>) -> Result<String, LlmError> {
        Err(LlmError::Transport("connection refused".into()))
    }
}

#[tokio::test]
async fn unreachable_llm_is_bad_gateway_and_records_nothing() {
    let client = LlmClient::new(Arc::new(Down)).with_retry(RetryPolicy {
        max_retries: 1,
        initial_backoff: Duration::from_millis(1),
        deadline: None,
    });
    let (app, _) = app_with(
        Engine::new(Arc::new(LexiconClassifier::shipped()), client),
        SessionConfig::default(),
    );
    call(&app, Method::POST, "/sessions", Some(json!({"id": "d"}))).await;
    let (status, body, _) = call(&app, Method::POST, "/sessions/d/messages", Some(json!({"text": "hi"}))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(json_of(&body)["code"], "LLMUnavailable");
    let (_, body, _) = call(&app, Method::GET, "/sessions/d", None).await;
    assert_eq!(json_of(&body)["turn_count"], 0);
}

#[tokio::test]
async fn transcript_is_available_mid_session() {
    let app = canned_app();
    call(&app, Method::POST, "/sessions", Some(json!({"id": "t", "seed": 3}))).await;
    for text in ["hello", "how are you?"] {
        let (status, _, _) = call(&app, Method::POST, "/sessions/t/messages", Some(json!({"text": text}))).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, body, ctype) = call(&app, Method::GET, "/sessions/t/transcript", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("application/x-ndjson"));
    let lines: Vec<Value> = body.lines().map(json_of).collect();
    assert_eq!(lines.len(), 2);
    for (i, line) in lines.iter().enumerate() {
        assert_valid("TurnRecord", line);
        assert_eq!(line["index"], i + 1);
        assert_eq!(line["session_id"], "t");
    }
}

#[tokio::test]
async fn event_stream_delivers_elements_then_close() {
    let replies: Vec<String> = (0..2).map(|i| format!("Reply number {i}! 😊")).collect();
    let engine = Engine::new(
        Arc::new(LexiconClassifier::shipped()),
        LlmClient::new(Arc::new(ScriptedLlm::new(replies))),
    );
    let config = SessionConfig {
        turn_limit: 2,
        ..SessionConfig::default()
    };
    let (app, _) = app_with(engine, config);
    call(&app, Method::POST, "/sessions", Some(json!({"id": "e"}))).await;

    let resp = app
        .clone()
        .oneshot(Request::get("/sessions/e/events").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let mut stream = resp.into_body().into_data_stream();

    for text in ["one", "two"] {
        let (status, _, _) = call(&app, Method::POST, "/sessions/e/messages", Some(json!({"text": text}))).await;
        assert_eq!(status, StatusCode::OK);
    }

    let mut buf = String::new();
    let collected = tokio::time::timeout(Duration::from_secs(5), async {
        while let Some(chunk) = stream.next().await {
            buf.push_str(std::str::from_utf8(&chunk.unwrap()).unwrap());
        }
        buf
    })
    .await
    .expect("stream ends after session_closed");
    let events: Vec<Value> = collected.lines().map(json_of).collect();
    for e in &events {
        assert_valid("StreamEvent", e);
    }
    let kinds: Vec<&str> = events.iter().map(|e| e["type"].as_str().unwrap()).collect();
    assert_eq!(kinds.last(), Some(&"session_closed"));
    assert_eq!(kinds.iter().filter(|k| **k == "turn_completed").count(), 2);
    let first_done = kinds.iter().position(|k| *k == "turn_completed").unwrap();
    assert!(kinds[..first_done].iter().all(|k| *k == "element"));
    assert!(first_done >= 2, "speech and action before completion: {kinds:?}");

    // a subscriber arriving after close gets the final event at once
    let (_, body, _) = call(&app, Method::GET, "/sessions/e/events", None).await;
    assert_eq!(json_of(body.trim())["type"], "session_closed");
}

#[tokio::test]
async fn serve_and_chat_write_identical_transcripts() {
    let replies = [
        "Hi! I'm Haru. 😊",
        "Whoa... That's amazing!",
        "Oh no, I'm sorry to hear that 😢",
        "Hmm, let me think about it.",
    ];
    let inputs = ["hello", "I won the lottery", "my cat is sick", "what should I do?"];
    let engine = || {
        Engine::new(
            Arc::new(LexiconClassifier::shipped()),
            LlmClient::new(Arc::new(ScriptedLlm::new(replies))),
        )
        .with_clock(Arc::new(StepClock::new(1_000, 250)))
    };
    let config = SessionConfig {
        seed: 99,
        ..SessionConfig::default()
    };

    let (app, _) = app_with(engine(), config.clone());
    call(&app, Method::POST, "/sessions", Some(json!({"id": "same"}))).await;
    for text in inputs {
        let (status, _, _) = call(
            &app,
            Method::POST,
            "/sessions/same/messages",
            Some(json!({"text": text})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, served, _) = call(&app, Method::GET, "/sessions/same/transcript", None).await;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chat.jsonl");
    let options = ChatOptions {
        session_id: Some("same".into()),
        transcript: Some(path.clone()),
        transcript_dir: dir.path().to_path_buf(),
    };
    let input = inputs.join("\n") + "\n";
    chat_loop(&engine(), config, &options, input.as_bytes(), std::io::sink()).unwrap();
    let chatted = std::fs::read_to_string(path).unwrap();

    assert!(!served.is_empty());
    assert_eq!(served, chatted);
}
