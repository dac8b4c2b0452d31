//! LLM access: a backend trait, a chat-completions HTTP backend, deterministic
//! mock backends, and the retrying client the session loop talks to.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::behavior::cut_at_tag;
use crate::http::{self, PostError};
use crate::persona::{ChatMessage, ChatRole, Prompt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Stop strings in addition to the prompt's own (the human tag).
    pub stop: Vec<String>,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            model: "llama-2-70b-chat".into(),
            temperature: 0.7,
            max_tokens: 200,
            stop: Vec::new(),
        }
    }
}

pub struct CompletionRequest<'a> {
    pub prompt: &'a Prompt,
    pub params: &'a SamplingParams,
    pub seed: u64,
}

impl CompletionRequest<'_> {
    pub fn stop_tags(&self) -> Vec<String> {
        let mut stops = self.prompt.stop.clone();
        for s in &self.params.stop {
            if !stops.contains(s) {
                stops.push(s.clone());
            }
        }
        stops
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    /// Network-level failure; the client retries these.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("LLM protocol error: {0}")]
    Protocol(String),
    #[error("LLM unavailable after {attempts} attempts: {reason}")]
    Unavailable { attempts: u32, reason: String },
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for Arc<T> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
    /// Total time budget across attempts; `None` for no limit.
    pub deadline: Option<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            initial_backoff: Duration::from_millis(250),
            deadline: Some(Duration::from_secs(90)),
        }
    }
}

/// A completion as received and after stop-tag cutting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub raw: String,
    pub text: String,
    pub attempts: u32,
}

/// Cuts `text` where any stop tag first starts a new turn (see
/// [`cut_at_tag`]).
pub fn cut_at_stop_tags(text: &str, stops: &[String]) -> String {
    stops
        .iter()
        .filter_map(|tag| cut_at_tag(text, tag))
        .min_by_key(String::len)
        .unwrap_or_else(|| text.to_string())
}

/// Retries transport failures with exponential backoff and honors stop tags
/// on the way out.
#[derive(Clone)]
pub struct LlmClient {
    backend: Arc<dyn LlmBackend>,
    retry: RetryPolicy,
}

impl LlmClient {
    pub fn new(backend: Arc<dyn LlmBackend>) -> Self {
        Self {
            backend,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn retry_policy(&self) -> &RetryPolicy {
        &self.retry
    }

    pub fn complete(&self, prompt: &Prompt, params: &SamplingParams, seed: u64) -> Result<Completion, LlmError> {
        let request = CompletionRequest { prompt, params, seed };
        let started = Instant::now();
        let mut backoff = self.retry.initial_backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.backend.complete(&request) {
                Ok(raw) => {
                    let text = cut_at_stop_tags(&raw, &request.stop_tags());
                    return Ok(Completion { raw, text, attempts });
                }
                Err(LlmError::Transport(reason)) => {
                    let out_of_time = self
                        .retry
                        .deadline
                        .is_some_and(|limit| started.elapsed() + backoff > limit);
                    if attempts > self.retry.max_retries || out_of_time {
                        return Err(LlmError::Unavailable { attempts, reason });
                    }
                    tracing::warn!(attempts, %reason, "LLM request failed; retrying");
                    std::thread::sleep(backoff);
                    backoff = backoff.saturating_mul(2);
                }
                Err(other) => return Err(other),
            }
        }
    }
}

/// Calls an OpenAI-style `/v1/chat/completions` endpoint.
pub struct HttpChatBackend {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
    stop: Vec<String>,
    seed: u64,
}

impl HttpChatBackend {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            agent: http::agent(timeout),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }
}

impl LlmBackend for HttpChatBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let body = ChatRequest {
            model: &request.params.model,
            messages: &request.prompt.messages,
            temperature: request.params.temperature,
            max_tokens: request.params.max_tokens,
            stop: request.stop_tags(),
            seed: request.seed,
        };
        let response = http::post_json(&self.agent, &self.endpoint, &body, self.api_key.as_deref())
            .map_err(|PostError::Transport(msg)| LlmError::Transport(msg))?;
        match response.status {
            200..=299 => parse_chat_reply(&response.body),
            408 | 429 | 500..=599 => Err(LlmError::Transport(format!("HTTP status {}", response.status))),
            status => Err(LlmError::Protocol(format!("HTTP status {status}: {}", response.body))),
        }
    }
}

/// Pulls the reply text out of a chat (or plain completion) response body.
pub fn parse_chat_reply(body: &str) -> Result<String, LlmError> {
    let value: Value = serde_json::from_str(body).map_err(|e| LlmError::Protocol(e.to_string()))?;
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::Protocol("response has no choices".into()))?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| LlmError::Protocol("choice has no text content".into()))
}

/// What a mock backend saw for one call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub seed: u64,
    pub prompt: String,
}

/// Replies from a fixed queue, in order. Errors once exhausted.
#[derive(Default)]
pub struct ScriptedLlm {
    replies: Mutex<VecDeque<String>>,
    seen: Mutex<Vec<RecordedRequest>>,
}

impl ScriptedLlm {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.seen.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

impl LlmBackend for ScriptedLlm {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        self.seen
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(RecordedRequest {
                seed: request.seed,
                prompt: request.prompt.text.clone(),
            });
        self.replies
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .pop_front()
            .ok_or_else(|| LlmError::Protocol("scripted backend has no replies left".into()))
    }
}

const CANNED_REPLIES: &[&str] = &[
    "😃 Wow, that sounds like so much fun! Tell me more?",
    "🤔 Hmm, I never thought about it that way. What made you think of it?",
    "😮 Whoa...That's amazing! I'm so proud of you! 🎉",
    "😢 Oh no, I'm sorry to hear that. I'm here for you.",
    "⚡ That gives me a jolt of excitement! I love learning about humans 😀",
    "😱 Water? Please keep it far away from my circuits!",
    "😂 Haha, you're funny! Do you know any other jokes?",
    "🙂 I like that a lot. What do you enjoy most about it?",
    "😤 That's not fair! Nobody should be treated that way.",
    "🤢 Ewww! That sounds gross. Let's talk about something else!",
];

/// Offline stand-in: picks a canned reply from a stable hash of the latest
/// user message and the request seed.
#[derive(Debug, Default, Clone, Copy)]
pub struct CannedLlm;

fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl LlmBackend for CannedLlm {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let latest = request
            .prompt
            .messages
            .iter()
            .rev()
            .find(|m| m.role == ChatRole::User)
            .map_or("", |m| m.content.as_str());
        let hash = fnv1a(latest.as_bytes(), 0xcbf2_9ce4_8422_2325 ^ request.seed);
        Ok(CANNED_REPLIES[(hash % CANNED_REPLIES.len() as u64) as usize].to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::{build_prompt, CharacterCard, DialogTurn, PromptBudget};
    use std::sync::atomic::{AtomicU32, Ordering};

    fn prompt() -> Prompt {
        build_prompt(
            &CharacterCard::shipped(),
            &[DialogTurn::human("hi")],
            &PromptBudget::default(),
        )
        .unwrap()
    }

    struct Down(AtomicU32);

    impl LlmBackend for Down {
        fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, LlmError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Err(LlmError::Transport("connection refused".into()))
        }
    }

    fn fast_retry() -> RetryPolicy {
        RetryPolicy {
            max_retries: 2,
            initial_backoff: Duration::from_millis(1),
            deadline: None,
        }
    }

    #[test]
    fn canned_reply_passes_through() {
        let client = LlmClient::new(Arc::new(ScriptedLlm::new(["Hello there! 😊"])));
        let c = client.complete(&prompt(), &SamplingParams::default(), 1).unwrap();
        assert_eq!(c.text, "Hello there! 😊");
        assert_eq!(c.raw, c.text);
        assert_eq!(c.attempts, 1);
    }

    #[test]
    fn down_endpoint_fails_after_three_attempts() {
        let backend = Arc::new(Down(AtomicU32::new(0)));
        let client = LlmClient::new(backend.clone()).with_retry(fast_retry());
        let err = client.complete(&prompt(), &SamplingParams::default(), 1).unwrap_err();
        assert!(matches!(err, LlmError::Unavailable { attempts: 3, .. }));
        assert_eq!(backend.0.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn human_continuation_is_cut_client_side() {
        let client = LlmClient::new(Arc::new(ScriptedLlm::new(["Sure thing! 😊\nHuman: hi\nHaru: hello"])));
        let c = client.complete(&prompt(), &SamplingParams::default(), 1).unwrap();
        assert_eq!(c.text, "Sure thing! 😊");
        assert!(c.raw.contains("Human: hi"));
    }

    #[test]
    fn extra_stop_tags_apply_too() {
        let params = SamplingParams {
            stop: vec!["###".into()],
            ..SamplingParams::default()
        };
        let client = LlmClient::new(Arc::new(ScriptedLlm::new(["One.\n### junk\nHuman: x"])));
        assert_eq!(client.complete(&prompt(), &params, 1).unwrap().text, "One.");
    }

    #[test]
    fn protocol_errors_are_not_retried() {
        let scripted = Arc::new(ScriptedLlm::new(Vec::<String>::new()));
        let client = LlmClient::new(scripted.clone()).with_retry(fast_retry());
        assert!(matches!(
            client.complete(&prompt(), &SamplingParams::default(), 1),
            Err(LlmError::Protocol(_))
        ));
        assert_eq!(scripted.requests().len(), 1);
    }

    #[test]
    fn chat_reply_parsing() {
        assert_eq!(
            parse_chat_reply(r#"{"choices":[{"message":{"role":"assistant","content":"Hi 😊"}}]}"#).unwrap(),
            "Hi 😊"
        );
        assert_eq!(parse_chat_reply(r#"{"choices":[{"text":"plain"}]}"#).unwrap(), "plain");
        for bad in [r#"{}"#, r#"{"choices":[]}"#, r#"{"choices":[{"message":{}}]}"#, "nope"] {
            assert!(matches!(parse_chat_reply(bad), Err(LlmError::Protocol(_))), "{bad}");
        }
    }

    #[test]
    fn canned_backend_is_deterministic() {
        let p = prompt();
        let params = SamplingParams::default();
        let req = |seed| CompletionRequest {
            prompt: &p,
            params: &params,
            seed,
        };
        assert_eq!(
            CannedLlm.complete(&req(5)).unwrap(),
            CannedLlm.complete(&req(5)).unwrap()
        );
    }
}
