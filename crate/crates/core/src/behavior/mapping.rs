use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::num::NonZeroUsize;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::emoji::{emoji_base_key, emoji_key, is_emoji_grapheme};
use super::genre::VoiceGenre;
use crate::emotion::EmotionLabel;

const SHIPPED_MAPPING: &str = include_str!("../../data/mapping.json");

/// Identifier of a pre-authored physical routine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoutineId(String);

impl RoutineId {
    /// Returns `None` for empty or whitespace-containing names.
    pub fn new(name: impl Into<String>) -> Option<Self> {
        let name = name.into();
        (!name.is_empty() && !name.chars().any(char::is_whitespace)).then_some(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RoutineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("failed to read mapping config: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse mapping config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported mapping config version {0}")]
    Version(u32),
    #[error("emotion_to_genre has no entry for `{0}`")]
    MissingEmotion(EmotionLabel),
    #[error("invalid routine identifier `{0}`")]
    BadRoutineName(String),
    #[error("emoji `{emoji}` maps to routine `{routine}` which is not in the registry")]
    UnknownRoutine { emoji: String, routine: String },
    #[error("emoji `{0}` has an empty routine list")]
    EmptyRoutineList(String),
    #[error("mapping key `{0}` is not a single emoji")]
    NotAnEmoji(String),
    #[error("emoji `{0}` is mapped more than once")]
    DuplicateEmoji(String),
    #[error("{name} must be in [0, 1], got {value}")]
    ThresholdOutOfRange { name: &'static str, value: f64 },
}

/// On-disk layout of a mapping config (`data/mapping.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingFile {
    pub version: u32,
    #[serde(default = "default_confidence_threshold")]
    pub confidence_threshold: f64,
    #[serde(default = "default_repeat_threshold")]
    pub repeat_similarity_threshold: f64,
    #[serde(default)]
    pub max_actions_per_response: Option<NonZeroUsize>,
    #[serde(default)]
    pub max_sentences_per_response: Option<NonZeroUsize>,
    pub emotion_to_genre: BTreeMap<EmotionLabel, VoiceGenre>,
    pub routines: Vec<String>,
    pub emoji_to_routines: BTreeMap<String, Vec<String>>,
}

fn default_confidence_threshold() -> f64 {
    0.6
}

fn default_repeat_threshold() -> f64 {
    0.9
}

/// Validated emotion→genre and emoji→routine tables plus guard settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingConfig {
    emotion_to_genre: BTreeMap<EmotionLabel, VoiceGenre>,
    routines: BTreeSet<RoutineId>,
    emoji_to_routines: BTreeMap<String, Vec<RoutineId>>,
    confidence_threshold: f64,
    repeat_similarity_threshold: f64,
    max_actions_per_response: Option<NonZeroUsize>,
    max_sentences_per_response: Option<NonZeroUsize>,
}

impl MappingConfig {
    pub fn from_file(file: MappingFile) -> Result<Self, MappingError> {
        if file.version != 1 {
            return Err(MappingError::Version(file.version));
        }
        for label in EmotionLabel::ALL {
            if !file.emotion_to_genre.contains_key(&label) {
                return Err(MappingError::MissingEmotion(label));
            }
        }
        check_unit("confidence_threshold", file.confidence_threshold)?;
        check_unit("repeat_similarity_threshold", file.repeat_similarity_threshold)?;

        let mut routines = BTreeSet::new();
        for name in file.routines {
            let id = RoutineId::new(name.clone()).ok_or(MappingError::BadRoutineName(name))?;
            routines.insert(id);
        }

        let mut emoji_to_routines = BTreeMap::new();
        for (emoji, names) in file.emoji_to_routines {
            let key = emoji_key(&emoji);
            if !is_single_emoji(&emoji) {
                return Err(MappingError::NotAnEmoji(emoji));
            }
            if names.is_empty() {
                return Err(MappingError::EmptyRoutineList(emoji));
            }
            let mut ids = Vec::with_capacity(names.len());
            for name in names {
                match RoutineId::new(name.clone()).filter(|id| routines.contains(id)) {
                    Some(id) => ids.push(id),
                    None => return Err(MappingError::UnknownRoutine { emoji, routine: name }),
                }
            }
            if emoji_to_routines.insert(key, ids).is_some() {
                return Err(MappingError::DuplicateEmoji(emoji));
            }
        }

        Ok(Self {
            emotion_to_genre: file.emotion_to_genre,
            routines,
            emoji_to_routines,
            confidence_threshold: file.confidence_threshold,
            repeat_similarity_threshold: file.repeat_similarity_threshold,
            max_actions_per_response: file.max_actions_per_response,
            max_sentences_per_response: file.max_sentences_per_response,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, MappingError> {
        Self::from_file(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MappingError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The bundled default tables.
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_MAPPING).expect("bundled mapping is valid")
    }

    pub fn to_file(&self) -> MappingFile {
        MappingFile {
            version: 1,
            confidence_threshold: self.confidence_threshold,
            repeat_similarity_threshold: self.repeat_similarity_threshold,
            max_actions_per_response: self.max_actions_per_response,
            max_sentences_per_response: self.max_sentences_per_response,
            emotion_to_genre: self.emotion_to_genre.clone(),
            routines: self.routines.iter().map(|r| r.to_string()).collect(),
            emoji_to_routines: self
                .emoji_to_routines
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|r| r.to_string()).collect()))
                .collect(),
        }
    }

    pub fn genre_for(&self, label: EmotionLabel) -> VoiceGenre {
        self.emotion_to_genre[&label]
    }

    /// Routine candidates for an emoji, ignoring presentation selectors and
    /// falling back to the skin-tone-free form.
    pub fn routines_for(&self, emoji: &str) -> Option<&[RoutineId]> {
        self.emoji_to_routines
            .get(&emoji_key(emoji))
            .or_else(|| self.emoji_to_routines.get(&emoji_base_key(emoji)))
            .map(Vec::as_slice)
    }

    pub fn has_routine(&self, routine: &RoutineId) -> bool {
        self.routines.contains(routine)
    }

    pub fn routines(&self) -> impl Iterator<Item = &RoutineId> {
        self.routines.iter()
    }

    pub fn mapped_emojis(&self) -> impl Iterator<Item = &str> {
        self.emoji_to_routines.keys().map(String::as_str)
    }

    pub fn confidence_threshold(&self) -> f64 {
        self.confidence_threshold
    }

    pub fn repeat_similarity_threshold(&self) -> f64 {
        self.repeat_similarity_threshold
    }

    pub fn max_actions_per_response(&self) -> Option<usize> {
        self.max_actions_per_response.map(NonZeroUsize::get)
    }

    pub fn max_sentences_per_response(&self) -> Option<usize> {
        self.max_sentences_per_response.map(NonZeroUsize::get)
    }

    pub fn with_confidence_threshold(mut self, value: f64) -> Result<Self, MappingError> {
        check_unit("confidence_threshold", value)?;
        self.confidence_threshold = value;
        Ok(self)
    }

    pub fn with_repeat_similarity_threshold(mut self, value: f64) -> Result<Self, MappingError> {
        check_unit("repeat_similarity_threshold", value)?;
        self.repeat_similarity_threshold = value;
        Ok(self)
    }

    /// `None` or `Some(0)` means unlimited.
    pub fn with_max_actions(mut self, cap: Option<usize>) -> Self {
        self.max_actions_per_response = cap.and_then(NonZeroUsize::new);
        self
    }

    /// `None` or `Some(0)` means unlimited.
    pub fn with_max_sentences(mut self, cap: Option<usize>) -> Self {
        self.max_sentences_per_response = cap.and_then(NonZeroUsize::new);
        self
    }
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self::shipped()
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), MappingError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(MappingError::ThresholdOutOfRange { name, value })
    }
}

fn is_single_emoji(text: &str) -> bool {
    use unicode_segmentation::UnicodeSegmentation;
    let mut graphemes = text.graphemes(true);
    matches!((graphemes.next(), graphemes.next()), (Some(g), None) if is_emoji_grapheme(g))
}
