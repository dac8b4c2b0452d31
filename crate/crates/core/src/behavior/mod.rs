//! Behavior generation from LLM text.
//!
//! The pipeline is: [`tokenize`] the reply into sentences and emojis, give
//! each sentence a [`VoiceGenre`] with [`select_genre`], swap each emoji for
//! a routine with [`select_routine`], and collect the result into a
//! [`BehaviorScript`]. [`apply_guards`] runs before all of this to trim
//! known LLM failure modes from the raw reply.

mod emoji;
mod emoji_table;
mod genre;
mod guard;
mod mapping;
mod routine;
mod script;
mod tokenize;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use emoji::{emoji_key, is_emoji_grapheme, is_extended_pictographic};
pub use genre::{detect_question, is_interrogative_form, select_genre, VoiceGenre};
pub use guard::{apply_guards, cut_at_tag, jaccard, repeats_recent, token_set, GuardReport, REPEAT_WINDOW};
pub use mapping::{MappingConfig, MappingError, MappingFile, RoutineId};
pub use routine::select_routine;
pub use script::{annotate, annotate_default, annotate_or_default, AnnotateError, BehaviorScript, ScriptElement};
pub use tokenize::{count_sentences, normalize_whitespace, tokenize, tokenize_spanned, SpannedToken, Token};

/// The random source used for routine choice. ChaCha8 output is stable
/// across platforms and releases, which keeps stored seeds replayable.
pub type BehaviorRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> BehaviorRng {
    ChaCha8Rng::seed_from_u64(seed)
}
