use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ClassifyError, EmotionClassifier, EmotionLabel, EmotionPrediction};

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.json");

/// One `(keyword, label, weight)` triple as stored in a lexicon file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconEntry {
    pub keyword: String,
    pub label: EmotionLabel,
    pub weight: f64,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read lexicon: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse lexicon: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("lexicon entry `{0}` has an empty keyword after normalization")]
    EmptyKeyword(String),
    #[error("lexicon entry `{keyword}` has non-positive weight {weight}")]
    BadWeight { keyword: String, weight: f64 },
    #[error("lexicon entry `{0}` maps to neutral; neutral is the no-match outcome")]
    NeutralEntry(String),
    #[error("lexicon keyword `{0}` appears more than once")]
    Duplicate(String),
}

/// Keyword/phrase lexicon. Keys are stored as normalized word sequences.
#[derive(Debug, Clone)]
pub struct EmotionLexicon {
    entries: HashMap<Vec<String>, (EmotionLabel, f64)>,
    longest: usize,
}

impl EmotionLexicon {
    pub fn from_entries(entries: impl IntoIterator<Item = LexiconEntry>) -> Result<Self, LexiconError> {
        let mut map = HashMap::new();
        let mut longest = 0;
        for entry in entries {
            let words = normalize_words(&entry.keyword);
            if words.is_empty() {
                return Err(LexiconError::EmptyKeyword(entry.keyword));
            }
            if !(entry.weight.is_finite() && entry.weight > 0.0) {
                return Err(LexiconError::BadWeight {
                    keyword: entry.keyword,
                    weight: entry.weight,
                });
            }
            if entry.label == EmotionLabel::Neutral {
                return Err(LexiconError::NeutralEntry(entry.keyword));
            }
            longest = longest.max(words.len());
            if map.insert(words, (entry.label, entry.weight)).is_some() {
                return Err(LexiconError::Duplicate(entry.keyword));
            }
        }
        Ok(Self { entries: map, longest })
    }

    pub fn from_json(json: &str) -> Result<Self, LexiconError> {
        let entries: Vec<LexiconEntry> = serde_json::from_str(json)?;
        Self::from_entries(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The lexicon bundled with the crate.
    pub fn shipped() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, keyword: &str) -> Option<(EmotionLabel, f64)> {
        self.entries.get(&normalize_words(keyword)).copied()
    }
}

/// Lowercases, drops apostrophes, and splits on anything that is not
/// alphanumeric. `"That's NOT fair!"` becomes `["thats", "not", "fair"]`.
pub fn normalize_words(text: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars() {
        if c == '\'' || c == '\u{2019}' {
            continue;
        }
        if c.is_alphanumeric() {
            cleaned.extend(c.to_lowercase());
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// Sums matched keyword weights per label and returns the strongest label.
///
/// Matching is greedy longest-match over normalized words, so "not fair"
/// consumes both words before "fair" alone is considered. Confidence is
/// `winner / (total + 1)`; no match yields neutral@1.0.
pub fn classify_lexicon(text: &str, lexicon: &EmotionLexicon) -> EmotionPrediction {
    let words = normalize_words(text);
    let mut scores = [0.0_f64; 6];
    let mut i = 0;
    while i < words.len() {
        let max_len = lexicon.longest.min(words.len() - i);
        let hit = (1..=max_len)
            .rev()
            .find_map(|len| lexicon.entries.get(&words[i..i + len]).map(|hit| (len, *hit)));
        match hit {
            Some((len, (label, weight))) => {
                scores[label as usize] += weight;
                i += len;
            }
            None => i += 1,
        }
    }

    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return EmotionPrediction::neutral();
    }
    // strict `>` keeps the earliest label on ties
    let mut winner = 0;
    for (idx, score) in scores.iter().enumerate() {
        if *score > scores[winner] {
            winner = idx;
        }
    }
    let confidence = (scores[winner] / (total + 1.0)).clamp(0.0, 1.0);
    EmotionPrediction {
        label: EmotionLabel::EMOTIONS[winner],
        confidence,
    }
}

/// [`EmotionClassifier`] backed by an [`EmotionLexicon`]. Never fails.
#[derive(Debug, Clone)]
pub struct LexiconClassifier {
    lexicon: EmotionLexicon,
}

impl LexiconClassifier {
    pub fn new(lexicon: EmotionLexicon) -> Self {
        Self { lexicon }
    }

    pub fn shipped() -> Self {
        Self::new(EmotionLexicon::shipped())
    }

    pub fn lexicon(&self) -> &EmotionLexicon {
        &self.lexicon
    }
}

impl EmotionClassifier for LexiconClassifier {
    fn classify(&self, text: &str) -> Result<EmotionPrediction, ClassifyError> {
        Ok(classify_lexicon(text, &self.lexicon))
    }
}
