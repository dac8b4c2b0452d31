use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::mapping::MappingConfig;
use crate::emotion::{EmotionLabel, EmotionPrediction};

/// Delivery style tag for one spoken sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoiceGenre {
    Cheeky,
    Default,
    Empathetic,
    HighEnergy,
    Question,
    Sad,
    Serious,
    Whiny,
    WhisperYell,
}

impl VoiceGenre {
    pub const ALL: [VoiceGenre; 9] = [
        VoiceGenre::Cheeky,
        VoiceGenre::Default,
        VoiceGenre::Empathetic,
        VoiceGenre::HighEnergy,
        VoiceGenre::Question,
        VoiceGenre::Sad,
        VoiceGenre::Serious,
        VoiceGenre::Whiny,
        VoiceGenre::WhisperYell,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VoiceGenre::Cheeky => "cheeky",
            VoiceGenre::Default => "default",
            VoiceGenre::Empathetic => "empathetic",
            VoiceGenre::HighEnergy => "high_energy",
            VoiceGenre::Question => "question",
            VoiceGenre::Sad => "sad",
            VoiceGenre::Serious => "serious",
            VoiceGenre::Whiny => "whiny",
            VoiceGenre::WhisperYell => "whisper_yell",
        }
    }
}

impl fmt::Display for VoiceGenre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VoiceGenre {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.replace('-', "_");
        VoiceGenre::ALL
            .into_iter()
            .find(|g| g.as_str() == wanted)
            .ok_or_else(|| format!("unknown voice genre `{s}`"))
    }
}

/// True iff the sentence ends with `?` once trailing whitespace is removed.
pub fn detect_question(sentence: &str) -> bool {
    sentence.trim_end().ends_with('?')
}

const INTERROGATIVE_OPENERS: &[&str] = &[
    "what", "whats", "why", "how", "hows", "when", "where", "wheres", "who", "whos", "whom", "whose", "which", "can",
    "cant", "could", "couldnt", "would", "wouldnt", "will", "wont", "shall", "should", "shouldnt", "do", "dont",
    "does", "doesnt", "did", "didnt", "is", "isnt", "are", "arent", "was", "wasnt", "were", "werent", "am", "have",
    "havent", "has", "hasnt", "had", "hadnt", "may", "might", "must", "wanna",
];

const TAG_PARTICLES: &[&str] = &["right", "huh", "eh", "ok", "okay", "yeah", "no"];

fn first_word(text: &str) -> Option<String> {
    text.split_whitespace().next().map(|w| {
        w.chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect()
    })
}

/// Whether a question is phrased as one (wh-word or auxiliary opener, or a
/// tag question like "..., isn't it?") rather than a statement spoken with
/// a question mark ("You're leaving me behind?").
pub fn is_interrogative_form(sentence: &str) -> bool {
    let body = sentence.trim_end().trim_end_matches(['?', '!']);
    if first_word(body).is_some_and(|w| INTERROGATIVE_OPENERS.contains(&w.as_str())) {
        return true;
    }
    match body.rsplit_once(',') {
        Some((_, tail)) => first_word(tail)
            .is_some_and(|w| INTERROGATIVE_OPENERS.contains(&w.as_str()) || TAG_PARTICLES.contains(&w.as_str())),
        None => false,
    }
}

/// Picks the voice genre for one sentence.
///
/// Order of precedence:
/// 1. interrogative questions take `question`;
/// 2. a non-neutral emotion at or above the confidence threshold takes its
///    mapped genre;
/// 3. any other sentence ending in `?` takes `question`;
/// 4. everything else is `default`.
pub fn select_genre(sentence: &str, prediction: &EmotionPrediction, config: &MappingConfig) -> VoiceGenre {
    let question = detect_question(sentence);
    if question && is_interrogative_form(sentence) {
        return VoiceGenre::Question;
    }
    if prediction.label != EmotionLabel::Neutral && prediction.confidence >= config.confidence_threshold() {
        return config.genre_for(prediction.label);
    }
    if question {
        VoiceGenre::Question
    } else {
        VoiceGenre::Default
    }
}
