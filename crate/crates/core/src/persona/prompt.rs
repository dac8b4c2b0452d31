use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CharacterCard, DialogTurn, ExampleConversation, Speaker};

/// Deterministic text sizing rule used for context budgeting.
#[derive(Clone, Default)]
pub enum UnitEstimator {
    /// `ceil(chars / 4)`, a rough token count.
    #[default]
    CharsOverFour,
    /// One unit per Unicode scalar value.
    Chars,
    /// One unit per whitespace-separated word.
    Words,
    Custom(Arc<dyn Fn(&str) -> usize + Send + Sync>),
}

impl UnitEstimator {
    pub fn estimate(&self, text: &str) -> usize {
        match self {
            UnitEstimator::CharsOverFour => text.chars().count().div_ceil(4),
            UnitEstimator::Chars => text.chars().count(),
            UnitEstimator::Words => text.split_whitespace().count(),
            UnitEstimator::Custom(f) => f(text),
        }
    }
}

impl fmt::Debug for UnitEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitEstimator::CharsOverFour => f.write_str("CharsOverFour"),
            UnitEstimator::Chars => f.write_str("Chars"),
            UnitEstimator::Words => f.write_str("Words"),
            UnitEstimator::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PromptBudget {
    pub max_units: usize,
    pub estimator: UnitEstimator,
}

impl PromptBudget {
    pub fn new(max_units: usize, estimator: UnitEstimator) -> Self {
        Self { max_units, estimator }
    }

    pub fn fits(&self, text: &str) -> bool {
        self.estimator.estimate(text) <= self.max_units
    }
}

impl Default for PromptBudget {
    fn default() -> Self {
        Self::new(3000, UnitEstimator::CharsOverFour)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

/// A fully assembled prompt.
///
/// `text` is the flat rendering (persona, examples, history, robot cue);
/// `messages` carries the same content split for chat-style endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    pub messages: Vec<ChatMessage>,
    pub stop: Vec<String>,
    pub dropped_history: usize,
    pub dropped_examples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("dialog history is empty")]
    EmptyHistory,
    #[error("dialog history must alternate speakers (turn {0})")]
    NotAlternating(usize),
    #[error("the latest turn must be the human's")]
    LastTurnNotHuman,
    #[error("persona plus the latest human turn need {needed} units, budget is {max}")]
    BudgetImpossible { needed: usize, max: usize },
}

const EXAMPLES_HEADER: &str = "### Example conversations";
const CONVERSATION_HEADER: &str = "### Conversation";

fn render_turn(card: &CharacterCard, turn: &DialogTurn) -> String {
    format!("{} {}", card.tag(turn.speaker), turn.text)
}

fn render_example(card: &CharacterCard, example: &ExampleConversation) -> String {
    example
        .turns
        .iter()
        .map(|t| render_turn(card, t))
        .collect::<Vec<_>>()
        .join("\n")
}

/// History rendered one `Tag: text` line per turn.
pub fn render_history(card: &CharacterCard, history: &[DialogTurn]) -> String {
    history
        .iter()
        .map(|t| render_turn(card, t))
        .collect::<Vec<_>>()
        .join("\n")
}

fn system_text(card: &CharacterCard, examples: &[ExampleConversation]) -> String {
    let mut text = card.persona().to_string();
    if !examples.is_empty() {
        text.push_str("\n\n");
        text.push_str(EXAMPLES_HEADER);
        for example in examples {
            text.push_str("\n\n");
            text.push_str(&render_example(card, example));
        }
    }
    text
}

fn render(card: &CharacterCard, history: &[DialogTurn], examples: &[ExampleConversation]) -> String {
    format!(
        "{}\n\n{CONVERSATION_HEADER}\n{}\n{}",
        system_text(card, examples),
        render_history(card, history),
        card.robot_tag()
    )
}

fn check_history(history: &[DialogTurn]) -> Result<(), PromptError> {
    let last = history.last().ok_or(PromptError::EmptyHistory)?;
    if last.speaker != Speaker::Human {
        return Err(PromptError::LastTurnNotHuman);
    }
    for (i, pair) in history.windows(2).enumerate() {
        if pair[0].speaker == pair[1].speaker {
            return Err(PromptError::NotAlternating(i + 1));
        }
    }
    Ok(())
}

/// Drops the oldest turns until the rendered history fits the budget.
///
/// Always returns a contiguous suffix and never drops the latest turn, even
/// if that turn alone is over budget.
pub fn truncate_history<'a>(
    card: &CharacterCard,
    history: &'a [DialogTurn],
    budget: &PromptBudget,
) -> &'a [DialogTurn] {
    let keep_from = (0..history.len())
        .find(|&start| budget.fits(&render_history(card, &history[start..])))
        .unwrap_or(history.len().saturating_sub(1));
    &history[keep_from..]
}

/// Assembles the prompt for the next robot turn.
///
/// Layout: persona, example conversations, dialog history, then the robot
/// tag as the generation cue. When over budget the oldest history turns go
/// first (the latest human turn is always kept), then whole examples,
/// oldest first. The persona is never touched.
pub fn build_prompt(
    card: &CharacterCard,
    history: &[DialogTurn],
    budget: &PromptBudget,
) -> Result<Prompt, PromptError> {
    check_history(history)?;
    let examples = card.examples();
    let latest = history.len() - 1;

    let candidates = (0..=latest)
        .map(|start| (start, 0))
        .chain((1..=examples.len()).map(|dropped| (latest, dropped)));
    for (start, dropped_examples) in candidates {
        let kept_history = &history[start..];
        let kept_examples = &examples[dropped_examples..];
        let text = render(card, kept_history, kept_examples);
        if budget.fits(&text) {
            return Ok(Prompt {
                messages: messages(card, kept_history, kept_examples),
                text,
                stop: vec![card.human_tag().to_string()],
                dropped_history: start,
                dropped_examples,
            });
        }
    }
    Err(PromptError::BudgetImpossible {
        needed: budget.estimator.estimate(&render(card, &history[latest..], &[])),
        max: budget.max_units,
    })
}

fn messages(card: &CharacterCard, history: &[DialogTurn], examples: &[ExampleConversation]) -> Vec<ChatMessage> {
    let mut out = vec![ChatMessage {
        role: ChatRole::System,
        content: system_text(card, examples),
    }];
    out.extend(history.iter().map(|t| ChatMessage {
        role: match t.speaker {
            Speaker::Human => ChatRole::User,
            Speaker::Robot => ChatRole::Assistant,
        },
        content: t.text.clone(),
    }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn card() -> CharacterCard {
        CharacterCard::shipped()
    }

    fn history(n: usize) -> Vec<DialogTurn> {
        (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    DialogTurn::human(format!("human line number {i}"))
                } else {
                    DialogTurn::robot(format!("robot line number {i} 😊"))
                }
            })
            .collect()
    }

    #[test]
    fn ample_budget_keeps_everything() {
        let card = card();
        let p = build_prompt(&card, &[DialogTurn::human("Hello!")], &PromptBudget::default()).unwrap();
        assert!(p.text.starts_with(card.persona()));
        assert!(p.text.ends_with(card.robot_tag()));
        for example in card.examples() {
            assert!(p.text.contains(&render_example(&card, example)));
        }
        assert!(p.text.contains("Human: Hello!\nHaru:"));
        assert_eq!(p.stop, vec!["Human:".to_string()]);
        assert_eq!((p.dropped_history, p.dropped_examples), (0, 0));
        assert_eq!(p.messages[0].role, ChatRole::System);
        assert_eq!(p.messages.last().unwrap().content, "Hello!");
    }

    #[test]
    fn tight_budget_drops_a_history_prefix() {
        let card = card();
        let hist = history(21);
        let chars = PromptBudget::new(0, UnitEstimator::Chars);
        let full = chars.estimator.estimate(&render(&card, &hist, card.examples()));
        // room for everything except roughly the first 8 turns
        let budget = PromptBudget::new(full - 150, UnitEstimator::Chars);
        let p = build_prompt(&card, &hist, &budget).unwrap();

        // enumerate every suffix; the chosen one is the longest that fits
        let expected = (0..hist.len())
            .find(|&k| budget.fits(&render(&card, &hist[k..], card.examples())))
            .unwrap();
        assert!(expected > 0);
        assert_eq!(p.dropped_history, expected);
        assert_eq!(p.dropped_examples, 0);
        assert!(p.text.contains(&render_history(&card, &hist[expected..])));
        assert!(!p.text.contains(&render_turn(&card, &hist[expected - 1])));
        assert!(p.text.contains("human line number 20"));
    }

    #[test]
    fn examples_drop_only_after_history_is_gone() {
        let card = card();
        let hist = history(5);
        let base = render(&card, &hist[4..], &card.examples()[2..]);
        let budget = PromptBudget::new(base.chars().count(), UnitEstimator::Chars);
        let p = build_prompt(&card, &hist, &budget).unwrap();
        assert_eq!(p.dropped_history, 4);
        assert_eq!(p.dropped_examples, 2);
        assert!(p.text.contains(card.persona()));
        assert!(!p.text.contains(&render_example(&card, &card.examples()[1])));
        assert!(p.text.contains(&render_example(&card, &card.examples()[2])));
    }

    #[test]
    fn budget_below_persona_is_impossible() {
        let card = card();
        let budget = PromptBudget::new(10, UnitEstimator::Chars);
        let err = build_prompt(&card, &[DialogTurn::human("hi")], &budget).unwrap_err();
        assert!(matches!(err, PromptError::BudgetImpossible { max: 10, .. }));
    }

    #[test]
    fn history_preconditions() {
        let card = card();
        let b = PromptBudget::default();
        assert_eq!(build_prompt(&card, &[], &b).unwrap_err(), PromptError::EmptyHistory);
        assert_eq!(
            build_prompt(&card, &[DialogTurn::human("a"), DialogTurn::robot("b")], &b).unwrap_err(),
            PromptError::LastTurnNotHuman
        );
        assert_eq!(
            build_prompt(&card, &[DialogTurn::human("a"), DialogTurn::human("b")], &b).unwrap_err(),
            PromptError::NotAlternating(1)
        );
    }

    #[test]
    fn truncate_history_cases() {
        let card = card();
        let hist = history(6);
        let unlimited = PromptBudget::new(usize::MAX, UnitEstimator::Chars);
        assert_eq!(truncate_history(&card, &hist, &unlimited), &hist[..]);

        let last_four = render_history(&card, &hist[2..]).chars().count();
        let b = PromptBudget::new(last_four, UnitEstimator::Chars);
        assert_eq!(truncate_history(&card, &hist, &b), &hist[2..]);

        let huge = vec![DialogTurn::human("x".repeat(500))];
        let b = PromptBudget::new(10, UnitEstimator::Chars);
        assert_eq!(truncate_history(&card, &huge, &b), &huge[..]);
    }

    #[test]
    fn estimators() {
        assert_eq!(UnitEstimator::CharsOverFour.estimate("abcde"), 2);
        assert_eq!(UnitEstimator::Chars.estimate("😊ab"), 3);
        assert_eq!(UnitEstimator::Words.estimate(" a  b c "), 3);
        let custom = UnitEstimator::Custom(Arc::new(|t: &str| t.len() * 2));
        assert_eq!(custom.estimate("ab"), 4);
    }
}
