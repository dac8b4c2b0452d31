//! Textual emotion recognition.
//!
//! Everything downstream only sees the [`EmotionClassifier`] contract: one
//! [`EmotionPrediction`] per sentence. Two implementations ship here, a
//! deterministic keyword lexicon ([`LexiconClassifier`]) and a JSON-over-HTTP
//! client for an external model ([`RemoteClassifier`]).

mod lexicon;
mod remote;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexicon::{classify_lexicon, normalize_words, EmotionLexicon, LexiconClassifier, LexiconEntry, LexiconError};
pub use remote::RemoteClassifier;

/// The closed set of emotions a classifier may report.
///
/// Declaration order is significant: it is the tie-break order used by the
/// lexicon classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionLabel {
    Anger,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
    Neutral,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 7] = [
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Joy,
        EmotionLabel::Sadness,
        EmotionLabel::Surprise,
        EmotionLabel::Neutral,
    ];

    /// The six non-neutral emotions.
    pub const EMOTIONS: [EmotionLabel; 6] = [
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Joy,
        EmotionLabel::Sadness,
        EmotionLabel::Surprise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Joy => "joy",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Neutral => "neutral",
        }
    }

    /// Reference emoji that typify this emotion. Used to check that a
    /// character card's examples demonstrate every emotion.
    pub fn reference_emojis(self) -> &'static [&'static str] {
        match self {
            EmotionLabel::Anger => &["😠", "🤬", "😤", "👿", "😡"],
            EmotionLabel::Disgust => &["🤮", "🤢", "🥴", "🤧"],
            EmotionLabel::Fear => &["😱", "😨", "😖", "😣"],
            EmotionLabel::Joy => &["☺", "😀", "😃", "🙂", "😊"],
            EmotionLabel::Sadness => &["😢", "😭", "😥", "☹"],
            EmotionLabel::Surprise => &["😮", "🤯", "😲", "😯"],
            EmotionLabel::Neutral => &[],
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown emotion label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for EmotionLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EmotionLabel::ALL
            .into_iter()
            .find(|label| label.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// A single-label prediction with a confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrediction")]
pub struct EmotionPrediction {
    pub label: EmotionLabel,
    pub confidence: f64,
}

#[derive(Deserialize)]
struct RawPrediction {
    label: EmotionLabel,
    confidence: f64,
}

impl TryFrom<RawPrediction> for EmotionPrediction {
    type Error = String;

    fn try_from(raw: RawPrediction) -> Result<Self, Self::Error> {
        EmotionPrediction::new(raw.label, raw.confidence)
            .ok_or_else(|| format!("confidence {} outside [0, 1]", raw.confidence))
    }
}

impl EmotionPrediction {
    /// Returns `None` when `confidence` is not a finite value in `[0, 1]`.
    pub fn new(label: EmotionLabel, confidence: f64) -> Option<Self> {
        if confidence.is_finite() && (0.0..=1.0).contains(&confidence) {
            Some(Self { label, confidence })
        } else {
            None
        }
    }

    /// The vacuous prediction: nothing emotional was found.
    pub fn neutral() -> Self {
        Self {
            label: EmotionLabel::Neutral,
            confidence: 1.0,
        }
    }

    /// Placeholder recorded for sentences that could not be classified.
    pub fn unknown() -> Self {
        Self {
            label: EmotionLabel::Neutral,
            confidence: 0.0,
        }
    }
}

impl fmt::Display for EmotionPrediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{:.2}", self.label, self.confidence)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("emotion service unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("malformed emotion service response: {0}")]
    MalformedResponse(String),
}

/// Anything that maps a sentence to one emotion.
///
/// Implementations must be shareable across sessions.
pub trait EmotionClassifier: Send + Sync {
    fn classify(&self, text: &str) -> Result<EmotionPrediction, ClassifyError>;
}

impl<T: EmotionClassifier + ?Sized> EmotionClassifier for std::sync::Arc<T> {
    fn classify(&self, text: &str) -> Result<EmotionPrediction, ClassifyError> {
        (**self).classify(text)
    }
}

/// Returns the same prediction for every input. Handy as a stand-in model.
#[derive(Debug, Clone, Copy)]
pub struct FixedClassifier(pub EmotionPrediction);

impl FixedClassifier {
    /// # Panics
    /// If `confidence` is outside `[0, 1]`.
    pub fn new(label: EmotionLabel, confidence: f64) -> Self {
        Self(EmotionPrediction::new(label, confidence).expect("confidence in [0, 1]"))
    }
}

impl EmotionClassifier for FixedClassifier {
    fn classify(&self, _text: &str) -> Result<EmotionPrediction, ClassifyError> {
        Ok(self.0)
    }
}
