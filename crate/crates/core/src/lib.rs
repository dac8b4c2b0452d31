//! Conversation engine that turns chat-LLM replies into expressive robot
//! behavior: genre-tagged speech and emoji-driven physical routines.
//!
//! Modules, bottom-up:
//! - [`emotion`]: classifier contract, keyword lexicon, remote client.
//! - [`behavior`]: tokenizer, genre and routine selection, guards, scripts.
//! - [`persona`]: character card loading and prompt assembly.
//! - [`orchestrator`]: sessions, LLM calls, transcripts and replay.
//! - [`analysis`]: error taxonomy, confusion matrix, chi-square, tallies.
//! - [`config`]: application configuration with environment overrides.

pub mod analysis;
pub mod behavior;
pub mod config;
pub mod emotion;
mod http;
pub mod orchestrator;
pub mod persona;
