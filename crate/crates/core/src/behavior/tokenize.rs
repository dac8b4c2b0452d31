use std::ops::Range;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use super::emoji::is_emoji_grapheme;

/// A piece of LLM output: either speakable text or one emoji.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "snake_case")]
pub enum Token {
    /// Whitespace-normalized sentence text. Never contains an emoji.
    Sentence(String),
    /// Exactly one emoji grapheme cluster.
    Emoji(String),
}

impl Token {
    pub fn as_str(&self) -> &str {
        match self {
            Token::Sentence(s) | Token::Emoji(s) => s,
        }
    }
}

/// A token plus the byte range it was cut from in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedToken {
    pub token: Token,
    pub span: Range<usize>,
}

/// Splits text into sentences and emojis, in source order.
///
/// A sentence ends at a run of `.`, `!`, `?` or `…` (plus closing quotes or
/// brackets) that is followed by whitespace or the end of input. An
/// ellipsis, or a run containing `!`/`?`, also ends a sentence when an
/// uppercase letter follows directly (`"Whoa...That's"`). Every emoji
/// becomes its own token and ends any sentence in progress.
pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_spanned(text).into_iter().map(|t| t.token).collect()
}

pub fn tokenize_spanned(text: &str) -> Vec<SpannedToken> {
    let mut out = Vec::new();
    let mut run_start = 0;
    for (idx, grapheme) in text.grapheme_indices(true) {
        if is_emoji_grapheme(grapheme) {
            split_sentences(text, run_start..idx, &mut out);
            out.push(SpannedToken {
                token: Token::Emoji(grapheme.to_string()),
                span: idx..idx + grapheme.len(),
            });
            run_start = idx + grapheme.len();
        }
    }
    split_sentences(text, run_start..text.len(), &mut out);
    out
}

/// Number of sentence tokens in `text`.
pub fn count_sentences(text: &str) -> usize {
    tokenize_spanned(text)
        .iter()
        .filter(|t| matches!(t.token, Token::Sentence(_)))
        .count()
}

/// Collapses every whitespace run to one space and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201D}' | '\u{2019}' | ')' | ']')
}

fn split_sentences(text: &str, range: Range<usize>, out: &mut Vec<SpannedToken>) {
    let run = &text[range.clone()];
    let chars: Vec<(usize, char)> = run.char_indices().collect();
    let mut piece_start = 0;
    let mut i = 0;
    while i < chars.len() {
        if !is_terminator(chars[i].1) {
            i += 1;
            continue;
        }
        let mut j = i;
        let mut dots = 0;
        let mut emphatic = false;
        while j < chars.len() && is_terminator(chars[j].1) {
            match chars[j].1 {
                '.' => dots += 1,
                '…' => dots += 2,
                _ => emphatic = true,
            }
            j += 1;
        }
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        let boundary = match chars.get(j) {
            None => true,
            Some((_, next)) if next.is_whitespace() => true,
            Some((_, next)) => next.is_uppercase() && (dots >= 2 || emphatic),
        };
        if boundary {
            let end = chars.get(j).map_or(run.len(), |(off, _)| *off);
            emit(text, range.start + piece_start, range.start + end, out);
            piece_start = end;
        }
        i = j;
    }
    emit(text, range.start + piece_start, range.end, out);
}

fn emit(text: &str, start: usize, end: usize, out: &mut Vec<SpannedToken>) {
    let piece = &text[start..end];
    let trimmed = piece.trim_start();
    let lead = piece.len() - trimmed.len();
    let trimmed = trimmed.trim_end();
    if trimmed.is_empty() {
        return;
    }
    let span_start = start + lead;
    out.push(SpannedToken {
        token: Token::Sentence(normalize_whitespace(trimmed)),
        span: span_start..span_start + trimmed.len(),
    });
}
