use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        })
    }
}

/// One coded free-text comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackLabel {
    pub polarity: Polarity,
    pub category: String,
}

impl FeedbackLabel {
    pub fn new(polarity: Polarity, category: impl Into<String>) -> Self {
        Self {
            polarity,
            category: category.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: String,
    pub count: u64,
}

/// Counts per category, most frequent first; ties keep first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackTally {
    pub positive: Vec<CategoryCount>,
    pub negative: Vec<CategoryCount>,
}

impl FeedbackTally {
    pub fn side(&self, polarity: Polarity) -> &[CategoryCount] {
        match polarity {
            Polarity::Positive => &self.positive,
            Polarity::Negative => &self.negative,
        }
    }

    pub fn total(&self, polarity: Polarity) -> u64 {
        self.side(polarity).iter().map(|c| c.count).sum()
    }

    pub fn count(&self, polarity: Polarity, category: &str) -> u64 {
        self.side(polarity)
            .iter()
            .find(|c| c.category == category)
            .map_or(0, |c| c.count)
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }
}

pub fn tally_feedback(labels: &[FeedbackLabel]) -> FeedbackTally {
    let mut tally = FeedbackTally::default();
    for label in labels {
        let side = match label.polarity {
            Polarity::Positive => &mut tally.positive,
            Polarity::Negative => &mut tally.negative,
        };
        match side.iter_mut().find(|c| c.category == label.category) {
            Some(entry) => entry.count += 1,
            None => side.push(CategoryCount {
                category: label.category.clone(),
                count: 1,
            }),
        }
    }
    tally.positive.sort_by_key(|c| std::cmp::Reverse(c.count));
    tally.negative.sort_by_key(|c| std::cmp::Reverse(c.count));
    tally
}

pub fn read_feedback(path: impl AsRef<Path>) -> Result<Vec<FeedbackLabel>, AnalysisError> {
    super::read_jsonl(path.as_ref())
}
