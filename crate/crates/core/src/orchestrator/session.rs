use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::clock::{Clock, SystemClock};
use super::llm::{Completion, LlmClient, LlmError, SamplingParams};
use crate::analysis::ErrorAnnotation;
use crate::behavior::{annotate_or_default, apply_guards, seeded_rng, BehaviorScript, GuardReport, MappingConfig};
use crate::emotion::{EmotionClassifier, EmotionPrediction};
use crate::persona::{build_prompt, CharacterCard, DialogTurn, Prompt, PromptBudget, PromptError};

pub const DEFAULT_TURN_LIMIT: usize = 11;

#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Exchanges per session, greetings included. At least 2.
    pub turn_limit: usize,
    pub sampling: SamplingParams,
    pub seed: u64,
    pub mapping: Arc<MappingConfig>,
    pub card: Arc<CharacterCard>,
    pub budget: PromptBudget,
    /// Only read by streaming speech adapters.
    pub silence_window: Duration,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            turn_limit: DEFAULT_TURN_LIMIT,
            sampling: SamplingParams::default(),
            seed: 0,
            mapping: Arc::new(MappingConfig::shipped()),
            card: Arc::new(CharacterCard::shipped()),
            budget: PromptBudget::default(),
            silence_window: Duration::from_secs(3),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.turn_limit < 2 {
            return Err(SessionError::Config(format!(
                "turn_limit must be at least 2 (hello and goodbye), got {}",
                self.turn_limit
            )));
        }
        if !(0.0..=2.0).contains(&self.sampling.temperature) {
            return Err(SessionError::Config(format!(
                "temperature must be within [0, 2], got {}",
                self.sampling.temperature
            )));
        }
        if self.sampling.max_tokens == 0 {
            return Err(SessionError::Config("max_tokens must be positive".into()));
        }
        if self.silence_window.is_zero() {
            return Err(SessionError::Config("silence_window must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error("session is closed")]
    SessionClosed,
    #[error("session is busy with another message")]
    SessionBusy,
    #[error("message is empty")]
    EmptyInput,
    #[error("no session with id {0}")]
    NotFound(String),
    #[error("LLM unavailable after {attempts} attempts: {reason}")]
    LlmUnavailable { attempts: u32, reason: String },
    #[error("LLM protocol error: {0}")]
    LlmProtocol(String),
    #[error("cannot build prompt: {0}")]
    Prompt(#[from] PromptError),
}

impl SessionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Config(_) => "ConfigError",
            SessionError::SessionClosed => "SessionClosed",
            SessionError::SessionBusy => "SessionBusy",
            SessionError::EmptyInput => "EmptyInput",
            SessionError::NotFound(_) => "SessionNotFound",
            SessionError::LlmUnavailable { .. } => "LLMUnavailable",
            SessionError::LlmProtocol(_) => "LLMProtocolError",
            SessionError::Prompt(_) => "PromptError",
        }
    }
}

impl From<LlmError> for SessionError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Unavailable { attempts, reason } => SessionError::LlmUnavailable { attempts, reason },
            LlmError::Transport(reason) => SessionError::LlmUnavailable { attempts: 1, reason },
            LlmError::Protocol(msg) => SessionError::LlmProtocol(msg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Open,
    Closed,
}

/// One exchange: the human message and everything the robot did with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub index: u32,
    pub human_text: String,
    /// The accepted LLM reply as received (after regeneration, if any).
    pub llm_raw: String,
    pub guard: GuardReport,
    pub script: BehaviorScript,
    pub seed_used: u64,
    pub t_request: u64,
    pub t_response: u64,
    pub regenerated: bool,
    pub classifier_fallback: bool,
    pub error_annotation: Option<ErrorAnnotation>,
}

impl Turn {
    pub fn emotion_trace(&self) -> Vec<EmotionPrediction> {
        self.script.emotions()
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    config: SessionConfig,
    turns: Vec<Turn>,
    state: SessionState,
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn is_open(&self) -> bool {
        self.state == SessionState::Open
    }

    pub fn close(&mut self) {
        self.state = SessionState::Closed;
    }

    /// Attaches a final error label to a recorded turn.
    pub fn set_error_annotation(&mut self, index: u32, annotation: ErrorAnnotation) -> bool {
        match self.turns.iter_mut().find(|t| t.index == index) {
            Some(turn) => {
                turn.error_annotation = Some(annotation);
                true
            }
            None => false,
        }
    }

    /// Dialog so far, as the prompt builder sees it.
    pub fn history(&self) -> Vec<DialogTurn> {
        self.turns
            .iter()
            .flat_map(|t| {
                [
                    DialogTurn::human(t.human_text.clone()),
                    DialogTurn::robot(t.guard.guarded_text.clone()),
                ]
            })
            .collect()
    }

    fn robot_lines(&self) -> Vec<String> {
        self.turns.iter().map(|t| t.guard.guarded_text.clone()).collect()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for turn `index` (from 1) of a session. Also seeds routine choice.
pub fn turn_seed(session_seed: u64, index: u32) -> u64 {
    splitmix64(session_seed ^ splitmix64(u64::from(index)))
}

/// Seed sent to the LLM for the given attempt of a turn.
pub fn llm_seed(turn_seed: u64, attempt: u32) -> u64 {
    splitmix64(turn_seed.wrapping_add(u64::from(attempt)))
}

/// Runs turns: prompt, LLM call, guards, annotation.
#[derive(Clone)]
pub struct Engine {
    classifier: Arc<dyn EmotionClassifier>,
    llm: LlmClient,
    clock: Arc<dyn Clock>,
}

impl Engine {
    pub fn new(classifier: Arc<dyn EmotionClassifier>, llm: LlmClient) -> Self {
        Self {
            classifier,
            llm,
            clock: Arc::new(SystemClock),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn classifier(&self) -> &dyn EmotionClassifier {
        self.classifier.as_ref()
    }

    pub fn create_session(&self, config: SessionConfig) -> Result<Session, SessionError> {
        self.create_session_with_id(uuid::Uuid::new_v4().to_string(), config)
    }

    pub fn create_session_with_id(
        &self,
        id: impl Into<String>,
        config: SessionConfig,
    ) -> Result<Session, SessionError> {
        config.validate()?;
        let id = id.into();
        if id.trim().is_empty() {
            return Err(SessionError::Config("session id is empty".into()));
        }
        Ok(Session {
            id,
            config,
            turns: Vec::new(),
            state: SessionState::Open,
        })
    }

    /// Runs one exchange. On LLM failure nothing is recorded and the session
    /// stays as it was.
    pub fn step<'s>(&self, session: &'s mut Session, human_text: &str) -> Result<&'s Turn, SessionError> {
        if !session.is_open() {
            return Err(SessionError::SessionClosed);
        }
        let human_text = human_text.trim();
        if human_text.is_empty() {
            return Err(SessionError::EmptyInput);
        }
        let config = &session.config;
        let index = session.turns.len() as u32 + 1;
        let seed_used = turn_seed(config.seed, index);

        let mut history = session.history();
        history.push(DialogTurn::human(human_text));
        let prompt = build_prompt(&config.card, &history, &config.budget)?;
        let robot_lines = session.robot_lines();
        let human_tag = config.card.human_tag();

        let t_request = self.clock.now_ms();
        let first = self.call(&prompt, config, seed_used, 0)?;
        let mut guard = apply_guards(&first.raw, &robot_lines, human_tag, &config.mapping);
        let mut llm_raw = first.raw;
        let mut regenerated = false;
        if guard.repeated_previous_line {
            match self.call(&prompt, config, seed_used, 1) {
                Ok(second) => {
                    regenerated = true;
                    guard = apply_guards(&second.raw, &robot_lines, human_tag, &config.mapping);
                    llm_raw = second.raw;
                }
                Err(err) => tracing::warn!(%err, "regeneration failed; keeping the repeated reply"),
            }
        }
        let t_response = self.clock.now_ms();

        let mut rng = seeded_rng(seed_used);
        let (script, classifier_fallback) =
            annotate_or_default(&guard.guarded_text, self.classifier.as_ref(), &config.mapping, &mut rng);

        session.turns.push(Turn {
            index,
            human_text: human_text.to_string(),
            llm_raw,
            guard,
            script,
            seed_used,
            t_request,
            t_response,
            regenerated,
            classifier_fallback,
            error_annotation: None,
        });
        if session.turns.len() >= session.config.turn_limit {
            session.state = SessionState::Closed;
        }
        Ok(session.turns.last().expect("just pushed"))
    }

    fn call(
        &self,
        prompt: &Prompt,
        config: &SessionConfig,
        seed: u64,
        attempt: u32,
    ) -> Result<Completion, SessionError> {
        Ok(self.llm.complete(prompt, &config.sampling, llm_seed(seed, attempt))?)
    }
}
