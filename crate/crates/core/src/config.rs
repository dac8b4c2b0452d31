//! Application configuration: a TOML file, then `EMOTALK_*` environment
//! overrides. Command-line flags are applied on top by the binary.
//!
//! ```toml
//! [llm]
//! backend = "http"            # or "canned" for the offline stand-in
//! endpoint = "http://127.0.0.1:8000/v1/chat/completions"
//! model = "llama-2-70b-chat"
//! temperature = 0.7
//! max_tokens = 200
//!
//! [classifier]
//! endpoint = "http://127.0.0.1:8001/classify"   # omit for the keyword lexicon
//!
//! [session]
//! turn_limit = 11
//! seed = 0
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{MappingConfig, MappingError};
use crate::emotion::{EmotionClassifier, EmotionLexicon, LexiconClassifier, LexiconError, RemoteClassifier};
use crate::orchestrator::{
    CannedLlm, HttpChatBackend, LlmBackend, LlmClient, RetryPolicy, SamplingParams, SessionConfig,
};
use crate::persona::{load_card, CardError, CharacterCard, PromptBudget, UnitEstimator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmBackendKind {
    Http,
    Canned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub backend: LlmBackendKind,
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop: Vec<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub deadline_secs: u64,
}

impl Default for LlmSection {
    fn default() -> Self {
        let sampling = SamplingParams::default();
        Self {
            backend: LlmBackendKind::Http,
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: sampling.model,
            api_key: None,
            temperature: sampling.temperature,
            max_tokens: sampling.max_tokens,
            stop: sampling.stop,
            timeout_secs: 30,
            max_retries: 2,
            deadline_secs: 90,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    /// Remote classifier URL. The keyword lexicon is used when unset.
    pub endpoint: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub timeout_secs: u64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        Self {
            endpoint: None,
            lexicon: None,
            timeout_secs: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub turn_limit: usize,
    pub seed: u64,
    /// Prompt budget in estimated tokens (characters / 4).
    pub max_prompt_units: usize,
    pub silence_window_ms: u64,
}

impl Default for SessionSection {
    fn default() -> Self {
        Self {
            turn_limit: crate::orchestrator::DEFAULT_TURN_LIMIT,
            seed: 0,
            max_prompt_units: PromptBudget::default().max_units,
            silence_window_ms: 3000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub mapping: Option<PathBuf>,
    pub card: Option<PathBuf>,
    pub transcript_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub host: String,
    pub port: u16,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub llm: LlmSection,
    pub classifier: ClassifierSection,
    pub session: SessionSection,
    pub paths: PathsSection,
    pub server: ServerSection,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("environment variable {key}={value:?}: {reason}")]
    Env { key: String, value: String, reason: String },
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Card(#[from] CardError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

fn parse_env<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Env {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` (defaults when `None`) and applies process environment
    /// overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::from_toml(&std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.display().to_string(),
                source,
            })?)?,
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    /// Applies `EMOTALK_*` overrides from the given pairs. Unrelated keys are
    /// ignored.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (key, value) in vars {
            let (key, value) = (key.as_ref(), value.as_ref());
            match key {
                "EMOTALK_LLM_BACKEND" => {
                    self.llm.backend = match value {
                        "http" => LlmBackendKind::Http,
                        "canned" => LlmBackendKind::Canned,
                        _ => {
                            return Err(ConfigError::Env {
                                key: key.into(),
                                value: value.into(),
                                reason: "expected `http` or `canned`".into(),
                            })
                        }
                    }
                }
                "EMOTALK_LLM_ENDPOINT" => self.llm.endpoint = value.into(),
                "EMOTALK_LLM_MODEL" => self.llm.model = value.into(),
                "EMOTALK_LLM_API_KEY" => self.llm.api_key = Some(value.into()),
                "EMOTALK_LLM_TEMPERATURE" => self.llm.temperature = parse_env(key, value)?,
                "EMOTALK_LLM_MAX_TOKENS" => self.llm.max_tokens = parse_env(key, value)?,
                "EMOTALK_LLM_TIMEOUT_SECS" => self.llm.timeout_secs = parse_env(key, value)?,
                "EMOTALK_CLASSIFIER_ENDPOINT" => self.classifier.endpoint = Some(value.into()),
                "EMOTALK_LEXICON" => self.classifier.lexicon = Some(value.into()),
                "EMOTALK_SEED" => self.session.seed = parse_env(key, value)?,
                "EMOTALK_TURN_LIMIT" => self.session.turn_limit = parse_env(key, value)?,
                "EMOTALK_MAPPING" => self.paths.mapping = Some(value.into()),
                "EMOTALK_CARD" => self.paths.card = Some(value.into()),
                "EMOTALK_TRANSCRIPT_DIR" => self.paths.transcript_dir = Some(value.into()),
                "EMOTALK_HOST" => self.server.host = value.into(),
                "EMOTALK_PORT" => self.server.port = parse_env(key, value)?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn mapping(&self) -> Result<MappingConfig, ConfigError> {
        Ok(match &self.paths.mapping {
            Some(p) => MappingConfig::load(p)?,
            None => MappingConfig::shipped(),
        })
    }

    pub fn card(&self) -> Result<CharacterCard, ConfigError> {
        Ok(match &self.paths.card {
            Some(p) => load_card(p)?,
            None => CharacterCard::shipped(),
        })
    }

    pub fn sampling(&self) -> SamplingParams {
        SamplingParams {
            model: self.llm.model.clone(),
            temperature: self.llm.temperature,
            max_tokens: self.llm.max_tokens,
            stop: self.llm.stop.clone(),
        }
    }

    pub fn session_config(&self) -> Result<SessionConfig, ConfigError> {
        Ok(SessionConfig {
            turn_limit: self.session.turn_limit,
            sampling: self.sampling(),
            seed: self.session.seed,
            mapping: Arc::new(self.mapping()?),
            card: Arc::new(self.card()?),
            budget: PromptBudget::new(self.session.max_prompt_units, UnitEstimator::CharsOverFour),
            silence_window: Duration::from_millis(self.session.silence_window_ms),
        })
    }

    pub fn classifier(&self) -> Result<Arc<dyn EmotionClassifier>, ConfigError> {
        Ok(match (&self.classifier.endpoint, &self.classifier.lexicon) {
            (Some(url), _) => Arc::new(RemoteClassifier::new(
                url.clone(),
                Duration::from_secs(self.classifier.timeout_secs),
            )),
            (None, Some(path)) => Arc::new(LexiconClassifier::new(EmotionLexicon::load(path)?)),
            (None, None) => Arc::new(LexiconClassifier::shipped()),
        })
    }

    pub fn llm_backend(&self) -> Arc<dyn LlmBackend> {
        match self.llm.backend {
            LlmBackendKind::Canned => Arc::new(CannedLlm),
            LlmBackendKind::Http => Arc::new(
                HttpChatBackend::new(self.llm.endpoint.clone(), Duration::from_secs(self.llm.timeout_secs))
                    .with_api_key(self.llm.api_key.clone()),
            ),
        }
    }

    pub fn llm_client(&self) -> LlmClient {
        LlmClient::new(self.llm_backend()).with_retry(RetryPolicy {
            max_retries: self.llm.max_retries,
            deadline: Some(Duration::from_secs(self.llm.deadline_secs)),
            ..RetryPolicy::default()
        })
    }
}
