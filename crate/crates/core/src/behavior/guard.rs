use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use unicode_segmentation::UnicodeSegmentation;

use super::emoji::is_emoji_grapheme;
use super::mapping::MappingConfig;
use super::tokenize::{tokenize_spanned, Token};

/// How many previous robot utterances the repeat check looks at.
pub const REPEAT_WINDOW: usize = 3;

/// Outcome of post-processing one raw LLM reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardReport {
    pub stripped_human_turn: bool,
    pub repeated_previous_line: bool,
    pub truncated_for_length: bool,
    pub guarded_text: String,
}

/// Cuts `text` just before the first place a new speaker turn starts with
/// `tag`: at the start of a line (ignoring indentation), or inline right
/// after a finished sentence or an emoji (`"Sure! 😊 Human: thanks"`).
/// A mid-sentence mention such as `"I said Human: is a tag."` is kept.
/// Returns `None` if there is no such place.
pub fn cut_at_tag(text: &str, tag: &str) -> Option<String> {
    if tag.is_empty() {
        return None;
    }
    text.match_indices(tag)
        .map(|(pos, _)| pos)
        .find(|&pos| starts_turn(&text[..pos]))
        .map(|pos| text[..pos].trim_end().to_string())
}

fn starts_turn(before: &str) -> bool {
    let line_prefix = before.rsplit('\n').next().unwrap_or(before);
    if line_prefix.trim().is_empty() {
        return true;
    }
    if !before.ends_with(char::is_whitespace) {
        return false;
    }
    let Some(last) = before.trim_end().graphemes(true).next_back() else {
        return true;
    };
    is_emoji_grapheme(last)
        || last
            .chars()
            .all(|c| matches!(c, '.' | '!' | '?' | '\u{2026}' | '"' | '\u{201D}' | ')'))
}

/// Lowercased word set with punctuation and emoji removed.
pub fn token_set(text: &str) -> BTreeSet<String> {
    crate::emotion::normalize_words(text).into_iter().collect()
}

/// Jaccard similarity of two word sets. Two empty sets score 0.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Whether `text` is near-identical to one of the last [`REPEAT_WINDOW`]
/// robot utterances.
pub fn repeats_recent(text: &str, robot_history: &[String], threshold: f64) -> bool {
    let current = token_set(text);
    robot_history
        .iter()
        .rev()
        .take(REPEAT_WINDOW)
        .any(|prev| jaccard(&current, &token_set(prev)) >= threshold)
}

/// Keeps at most `cap` sentences. The cut lands where sentence `cap + 1`
/// begins, so emoji trailing the last kept sentence survive.
fn truncate_sentences(text: &str, cap: usize) -> Option<String> {
    let cut = tokenize_spanned(text)
        .into_iter()
        .filter(|t| matches!(t.token, Token::Sentence(_)))
        .nth(cap)?
        .span
        .start;
    Some(text[..cut].trim_end().to_string())
}

/// Applies the three post-processing guards in order: human-turn cut,
/// repeat detection, sentence cap.
///
/// The result only ever removes a suffix of `text`; nothing is inserted.
pub fn apply_guards(text: &str, robot_history: &[String], human_tag: &str, config: &MappingConfig) -> GuardReport {
    let (mut guarded, stripped_human_turn) = match cut_at_tag(text, human_tag) {
        Some(cut) => (cut, true),
        None => (text.to_string(), false),
    };

    let repeated_previous_line = repeats_recent(&guarded, robot_history, config.repeat_similarity_threshold());

    let mut truncated_for_length = false;
    if let Some(cap) = config.max_sentences_per_response() {
        if let Some(cut) = truncate_sentences(&guarded, cap) {
            guarded = cut;
            truncated_for_length = true;
        }
    }

    GuardReport {
        stripped_human_turn,
        repeated_previous_line,
        truncated_for_length,
        guarded_text: guarded,
    }
}
