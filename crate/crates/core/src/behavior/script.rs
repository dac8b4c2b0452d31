use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::genre::{select_genre, VoiceGenre};
use super::mapping::{MappingConfig, RoutineId};
use super::routine::select_routine;
use super::tokenize::{tokenize, Token};
use crate::emotion::{ClassifyError, EmotionClassifier, EmotionPrediction};

/// One step of robot behavior.
///
/// Serialized form matches the transcript schema:
/// `{"kind":"speech","text":..,"genre":..}` or
/// `{"kind":"action","routine":..,"emoji":..}`. The per-sentence emotion is
/// kept alongside in memory but stored separately on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptElement {
    Speech {
        text: String,
        genre: VoiceGenre,
        #[serde(skip, default = "EmotionPrediction::unknown")]
        emotion: EmotionPrediction,
    },
    Action {
        routine: RoutineId,
        emoji: String,
    },
}

/// Ordered speech segments and actions for one robot reply.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BehaviorScript {
    pub elements: Vec<ScriptElement>,
}

impl BehaviorScript {
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    /// Emotion of each speech element, in order.
    pub fn emotions(&self) -> Vec<EmotionPrediction> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                ScriptElement::Speech { emotion, .. } => Some(*emotion),
                ScriptElement::Action { .. } => None,
            })
            .collect()
    }

    /// Re-attaches stored emotions to deserialized speech elements.
    /// Extra or missing emotions leave the remaining elements untouched.
    pub fn with_emotions(mut self, emotions: &[EmotionPrediction]) -> Self {
        let speech = self.elements.iter_mut().filter_map(|e| match e {
            ScriptElement::Speech { emotion, .. } => Some(emotion),
            ScriptElement::Action { .. } => None,
        });
        for (slot, value) in speech.zip(emotions) {
            *slot = *value;
        }
        self
    }

    pub fn speech(&self) -> impl Iterator<Item = (&str, VoiceGenre)> {
        self.elements.iter().filter_map(|e| match e {
            ScriptElement::Speech { text, genre, .. } => Some((text.as_str(), *genre)),
            ScriptElement::Action { .. } => None,
        })
    }

    pub fn actions(&self) -> impl Iterator<Item = (&RoutineId, &str)> {
        self.elements.iter().filter_map(|e| match e {
            ScriptElement::Action { routine, emoji } => Some((routine, emoji.as_str())),
            ScriptElement::Speech { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotateError {
    #[error("emotion classification failed for sentence {index}: {source}")]
    Classifier {
        index: usize,
        #[source]
        source: ClassifyError,
    },
}

/// Turns LLM text into a behavior script.
///
/// Each sentence is classified and given a genre; each emoji becomes an
/// action (unmapped emoji are dropped with a warning). When
/// `max_actions_per_response` is set only the first N actions are kept.
pub fn annotate<R: Rng + ?Sized>(
    text: &str,
    classifier: &dyn EmotionClassifier,
    config: &MappingConfig,
    rng: &mut R,
) -> Result<BehaviorScript, AnnotateError> {
    build(text, config, rng, |index, sentence| {
        classifier
            .classify(sentence)
            .map_err(|source| AnnotateError::Classifier { index, source })
    })
}

/// Like [`annotate`], but a classifier failure degrades every sentence to
/// the `default` genre instead of failing. The flag reports the fallback.
///
/// Actions are identical either way: routine draws do not depend on
/// classification.
pub fn annotate_or_default<R: Rng + Clone>(
    text: &str,
    classifier: &dyn EmotionClassifier,
    config: &MappingConfig,
    rng: &mut R,
) -> (BehaviorScript, bool) {
    let mut attempt_rng = rng.clone();
    match annotate(text, classifier, config, &mut attempt_rng) {
        Ok(script) => {
            *rng = attempt_rng;
            (script, false)
        }
        Err(err) => {
            tracing::warn!(%err, "falling back to default voice for this reply");
            (annotate_default(text, config, rng), true)
        }
    }
}

/// Script with every sentence at the `default` genre.
pub fn annotate_default<R: Rng + ?Sized>(text: &str, config: &MappingConfig, rng: &mut R) -> BehaviorScript {
    let result: Result<_, AnnotateError> = build(text, config, rng, |_, _| Ok(EmotionPrediction::unknown()));
    let mut script = result.expect("infallible");
    for element in &mut script.elements {
        if let ScriptElement::Speech { genre, .. } = element {
            *genre = VoiceGenre::Default;
        }
    }
    script
}

fn build<R, F>(
    text: &str,
    config: &MappingConfig,
    rng: &mut R,
    mut classify: F,
) -> Result<BehaviorScript, AnnotateError>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &str) -> Result<EmotionPrediction, AnnotateError>,
{
    let cap = config.max_actions_per_response().unwrap_or(usize::MAX);
    let mut actions = 0;
    let mut sentence_index = 0;
    let mut elements = Vec::new();
    for token in tokenize(text) {
        match token {
            Token::Sentence(sentence) => {
                let emotion = classify(sentence_index, &sentence)?;
                sentence_index += 1;
                let genre = select_genre(&sentence, &emotion, config);
                elements.push(ScriptElement::Speech {
                    text: sentence,
                    genre,
                    emotion,
                });
            }
            Token::Emoji(emoji) => {
                if actions >= cap {
                    continue;
                }
                match select_routine(&emoji, config, rng) {
                    Some(routine) => {
                        actions += 1;
                        elements.push(ScriptElement::Action { routine, emoji });
                    }
                    None => tracing::warn!(%emoji, "no routine mapped for emoji; dropping it"),
                }
            }
        }
    }
    Ok(BehaviorScript { elements })
}
