//! Character card: who the robot is, plus a few example conversations that
//! teach the LLM its voice and its emoji habits.
//!
//! Card file layout (JSON, `version` 1):
//!
//! ```json
//! {
//!   "version": 1,
//!   "persona": "You are ...",
//!   "robot_tag": "Haru:",
//!   "human_tag": "Human:",
//!   "examples": [
//!     { "turns": [ { "speaker": "human", "text": "..." },
//!                  { "speaker": "robot", "text": "... 😊" } ] }
//!   ]
//! }
//! ```

mod prompt;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_segmentation::UnicodeSegmentation;

use crate::behavior::{emoji_key, is_emoji_grapheme};
use crate::emotion::EmotionLabel;

pub use prompt::{
    build_prompt, render_history, truncate_history, ChatMessage, ChatRole, Prompt, PromptBudget, PromptError,
    UnitEstimator,
};

const SHIPPED_CARD: &str = include_str!("../../data/card.json");

pub const MAX_EXAMPLES: usize = 5;
pub const MAX_EXAMPLE_TURNS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Human,
    Robot,
}

/// One utterance in an example conversation or in live dialog history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialogTurn {
    pub speaker: Speaker,
    pub text: String,
}

impl DialogTurn {
    pub fn human(text: impl Into<String>) -> Self {
        Self {
            speaker: Speaker::Human,
            text: text.into(),
        }
    }

    pub fn robot(text: impl Into<String>) -> Self {
        Self {
            speaker: Speaker::Robot,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleConversation {
    pub turns: Vec<DialogTurn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardFile {
    pub version: u32,
    pub persona: String,
    pub robot_tag: String,
    pub human_tag: String,
    pub examples: Vec<ExampleConversation>,
}

/// A validated character card. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterCard {
    persona: String,
    robot_tag: String,
    human_tag: String,
    examples: Vec<ExampleConversation>,
}

/// Names the card invariant that was violated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CardViolation {
    UnsupportedVersion(u32),
    EmptyPersona,
    EmptyTag(&'static str),
    SameTags,
    TooManyExamples(usize),
    EmptyExample(usize),
    ExampleTooLong { example: usize, turns: usize },
    NotAlternating { example: usize, turn: usize },
    MustStartWithHuman(usize),
    EmptyUtterance { example: usize, turn: usize },
    MissingEmotionEmoji(EmotionLabel),
}

impl fmt::Display for CardViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CardViolation::UnsupportedVersion(v) => write!(f, "unsupported card version {v}"),
            CardViolation::EmptyPersona => f.write_str("persona is empty"),
            CardViolation::EmptyTag(which) => write!(f, "{which} is empty"),
            CardViolation::SameTags => f.write_str("robot_tag and human_tag must differ"),
            CardViolation::TooManyExamples(n) => {
                write!(f, "card has {n} example conversations, at most {MAX_EXAMPLES} allowed")
            }
            CardViolation::EmptyExample(i) => write!(f, "example {} has no turns", i + 1),
            CardViolation::ExampleTooLong { example, turns } => write!(
                f,
                "example {} exceeds {MAX_EXAMPLE_TURNS} turns ({turns} turns)",
                example + 1
            ),
            CardViolation::NotAlternating { example, turn } => {
                write!(f, "example {} turn {}: speakers must alternate", example + 1, turn + 1)
            }
            CardViolation::MustStartWithHuman(i) => write!(f, "example {} must start with the human", i + 1),
            CardViolation::EmptyUtterance { example, turn } => {
                write!(f, "example {} turn {} is empty", example + 1, turn + 1)
            }
            CardViolation::MissingEmotionEmoji(label) => {
                write!(f, "no robot example utterance uses a reference emoji for `{label}`")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum CardError {
    #[error("failed to read character card: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse character card: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid character card: {0}")]
    Validation(CardViolation),
}

impl CharacterCard {
    pub fn from_file(file: CardFile) -> Result<Self, CardError> {
        validate(&file).map_err(CardError::Validation)?;
        Ok(Self {
            persona: file.persona,
            robot_tag: file.robot_tag,
            human_tag: file.human_tag,
            examples: file.examples,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, CardError> {
        Self::from_file(serde_json::from_str(json)?)
    }

    /// The bundled default card.
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_CARD).expect("bundled card is valid")
    }

    pub fn persona(&self) -> &str {
        &self.persona
    }

    pub fn robot_tag(&self) -> &str {
        &self.robot_tag
    }

    pub fn human_tag(&self) -> &str {
        &self.human_tag
    }

    pub fn examples(&self) -> &[ExampleConversation] {
        &self.examples
    }

    pub fn tag(&self, speaker: Speaker) -> &str {
        match speaker {
            Speaker::Human => &self.human_tag,
            Speaker::Robot => &self.robot_tag,
        }
    }

    pub fn to_file(&self) -> CardFile {
        CardFile {
            version: 1,
            persona: self.persona.clone(),
            robot_tag: self.robot_tag.clone(),
            human_tag: self.human_tag.clone(),
            examples: self.examples.clone(),
        }
    }
}

/// Reads and validates a card file.
pub fn load_card(path: impl AsRef<Path>) -> Result<CharacterCard, CardError> {
    CharacterCard::from_json(&std::fs::read_to_string(path)?)
}

fn validate(file: &CardFile) -> Result<(), CardViolation> {
    if file.version != 1 {
        return Err(CardViolation::UnsupportedVersion(file.version));
    }
    if file.persona.trim().is_empty() {
        return Err(CardViolation::EmptyPersona);
    }
    if file.robot_tag.trim().is_empty() {
        return Err(CardViolation::EmptyTag("robot_tag"));
    }
    if file.human_tag.trim().is_empty() {
        return Err(CardViolation::EmptyTag("human_tag"));
    }
    if file.robot_tag.trim() == file.human_tag.trim() {
        return Err(CardViolation::SameTags);
    }
    if file.examples.len() > MAX_EXAMPLES {
        return Err(CardViolation::TooManyExamples(file.examples.len()));
    }
    for (i, example) in file.examples.iter().enumerate() {
        let turns = &example.turns;
        if turns.is_empty() {
            return Err(CardViolation::EmptyExample(i));
        }
        if turns.len() > MAX_EXAMPLE_TURNS {
            return Err(CardViolation::ExampleTooLong {
                example: i,
                turns: turns.len(),
            });
        }
        if turns[0].speaker != Speaker::Human {
            return Err(CardViolation::MustStartWithHuman(i));
        }
        for (t, pair) in turns.windows(2).enumerate() {
            if pair[0].speaker == pair[1].speaker {
                return Err(CardViolation::NotAlternating {
                    example: i,
                    turn: t + 1,
                });
            }
        }
        if let Some(t) = turns.iter().position(|turn| turn.text.trim().is_empty()) {
            return Err(CardViolation::EmptyUtterance { example: i, turn: t });
        }
    }

    let used: BTreeSet<String> = file
        .examples
        .iter()
        .flat_map(|e| &e.turns)
        .filter(|t| t.speaker == Speaker::Robot)
        .flat_map(|t| t.text.graphemes(true).filter(|g| is_emoji_grapheme(g)).map(emoji_key))
        .collect();
    for label in EmotionLabel::EMOTIONS {
        if !label.reference_emojis().iter().any(|e| used.contains(&emoji_key(e))) {
            return Err(CardViolation::MissingEmotionEmoji(label));
        }
    }
    Ok(())
}
