//! Session management: prompt, LLM call, guards and annotation per turn,
//! the turn limit, and transcripts that replay deterministically.

mod clock;
mod hub;
mod input;
mod llm;
mod session;
mod transcript;

pub use clock::{Clock, StepClock, SystemClock};
pub use hub::{SessionHub, SessionOptions, SessionView};
pub use input::{SilenceSegmenter, UtteranceSource};
pub use llm::{
    cut_at_stop_tags, parse_chat_reply, CannedLlm, Completion, CompletionRequest, HttpChatBackend, LlmBackend,
    LlmClient, LlmError, RecordedRequest, RetryPolicy, SamplingParams, ScriptedLlm,
};
pub use session::{
    llm_seed, turn_seed, Engine, Session, SessionConfig, SessionError, SessionState, Turn, DEFAULT_TURN_LIMIT,
};
pub use transcript::{
    parse_records, persist_transcript, read_transcript, replay_records, transcript_records, write_records, GuardFlags,
    ReplayOutcome, TranscriptError, TurnRecord,
};
