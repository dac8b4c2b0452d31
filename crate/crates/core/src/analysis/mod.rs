//! Error analysis over annotated transcripts: the human × LLM error
//! confusion matrix, its 2×2 collapse and chi-square test, feedback tallies,
//! and annotation helpers.

mod annotations;
mod feedback;
mod report;
mod stats;

use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotations::{
    merge_majority, read_annotations, suggest_annotations, write_annotations, AnnotationRecord, MergeOutcome,
    MergedAnnotation, Suggestion, UnresolvedAnnotation,
};
pub use feedback::{read_feedback, tally_feedback, CategoryCount, FeedbackLabel, FeedbackTally, Polarity};
pub use report::{analyze, AnalysisReport, ChiSquareOutcome};
pub use stats::{
    chi_square_2x2, chi_square_2x2_with, chi_square_sf, ln_gamma, regularized_gamma_p, regularized_gamma_q, ChiSquare,
    StatsError, TwoByTwo,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HumanErrorType {
    #[serde(rename = "ASR")]
    Asr,
    NoInputCaptured,
    NoError,
}

impl HumanErrorType {
    pub const ALL: [HumanErrorType; 3] = [
        HumanErrorType::Asr,
        HumanErrorType::NoInputCaptured,
        HumanErrorType::NoError,
    ];

    pub fn label(self) -> &'static str {
        match self {
            HumanErrorType::Asr => "ASR",
            HumanErrorType::NoInputCaptured => "No input captured",
            HumanErrorType::NoError => "No error",
        }
    }

    pub fn is_error(self) -> bool {
        self != HumanErrorType::NoError
    }
}

impl fmt::Display for HumanErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LlmErrorType {
    EthicalViolation,
    Hallucination,
    IgnoresHumanQuestion,
    RespondsAsHuman,
    Misunderstood,
    RepeatsPreviousLine,
    ReplyTooLong,
    NoError,
}

impl LlmErrorType {
    pub const ALL: [LlmErrorType; 8] = [
        LlmErrorType::EthicalViolation,
        LlmErrorType::Hallucination,
        LlmErrorType::IgnoresHumanQuestion,
        LlmErrorType::RespondsAsHuman,
        LlmErrorType::Misunderstood,
        LlmErrorType::RepeatsPreviousLine,
        LlmErrorType::ReplyTooLong,
        LlmErrorType::NoError,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LlmErrorType::EthicalViolation => "Ethical violation",
            LlmErrorType::Hallucination => "Hallucination",
            LlmErrorType::IgnoresHumanQuestion => "Ignores human question",
            LlmErrorType::RespondsAsHuman => "LLM responds as human",
            LlmErrorType::Misunderstood => "Misunderstood",
            LlmErrorType::RepeatsPreviousLine => "Repeats previous line",
            LlmErrorType::ReplyTooLong => "Reply too long",
            LlmErrorType::NoError => "No error",
        }
    }

    pub fn is_error(self) -> bool {
        self != LlmErrorType::NoError
    }
}

impl fmt::Display for LlmErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The final (human, LLM) error label for one turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorAnnotation {
    pub human_error: HumanErrorType,
    pub llm_error: LlmErrorType,
}

impl ErrorAnnotation {
    pub fn new(human_error: HumanErrorType, llm_error: LlmErrorType) -> Self {
        Self { human_error, llm_error }
    }
}

/// Counts of human error type (rows) × LLM error type (columns), both in
/// their `ALL` order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorConfusionMatrix {
    counts: [[u64; 8]; 3],
    n: u64,
}

impl ErrorConfusionMatrix {
    pub fn add(&mut self, annotation: ErrorAnnotation) {
        self.counts[annotation.human_error as usize][annotation.llm_error as usize] += 1;
        self.n += 1;
    }

    pub fn get(&self, human: HumanErrorType, llm: LlmErrorType) -> u64 {
        self.counts[human as usize][llm as usize]
    }

    pub fn row(&self, human: HumanErrorType) -> [u64; 8] {
        self.counts[human as usize]
    }

    pub fn counts(&self) -> &[[u64; 8]; 3] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn row_totals(&self) -> [u64; 3] {
        self.counts.map(|row| row.iter().sum())
    }

    pub fn column_totals(&self) -> [u64; 8] {
        let mut totals = [0; 8];
        for row in &self.counts {
            for (t, c) in totals.iter_mut().zip(row) {
                *t += c;
            }
        }
        totals
    }
}

pub fn build_confusion_matrix(annotations: &[ErrorAnnotation]) -> ErrorConfusionMatrix {
    let mut m = ErrorConfusionMatrix::default();
    for a in annotations {
        m.add(*a);
    }
    m
}

/// Collapses to human error (ASR or no input) vs none, against any LLM error
/// vs none.
pub fn collapse_2x2(m: &ErrorConfusionMatrix) -> TwoByTwo {
    let mut t = TwoByTwo::new(0, 0, 0, 0);
    for h in HumanErrorType::ALL {
        for l in LlmErrorType::ALL {
            let count = m.get(h, l);
            match (h.is_error(), l.is_error()) {
                (true, true) => t.a += count,
                (true, false) => t.b += count,
                (false, true) => t.c += count,
                (false, false) => t.d += count,
            }
        }
    }
    t
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{} turns have no annotation: {}", .0.len(), format_keys(.0))]
    Unannotated(Vec<(String, u32)>),
    #[error("no annotations to analyze")]
    NoAnnotations,
}

fn format_keys(keys: &[(String, u32)]) -> String {
    const SHOWN: usize = 20;
    let mut out: Vec<String> = keys.iter().take(SHOWN).map(|(s, i)| format!("{s}#{i}")).collect();
    if keys.len() > SHOWN {
        out.push(format!("... and {} more", keys.len() - SHOWN));
    }
    out.join(", ")
}

/// Reads line-delimited JSON, skipping blank lines.
pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, AnalysisError> {
    let io_err = |source| AnalysisError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| AnalysisError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use HumanErrorType as H;
    use LlmErrorType as L;

    #[test]
    fn empty_matrix() {
        let m = build_confusion_matrix(&[]);
        assert_eq!(m.n(), 0);
        assert!(m.counts().iter().flatten().all(|&c| c == 0));
        assert_eq!(collapse_2x2(&m), TwoByTwo::new(0, 0, 0, 0));
    }

    #[test]
    fn hand_counted_matrix() {
        let m = build_confusion_matrix(&[
            ErrorAnnotation::new(H::Asr, L::NoError),
            ErrorAnnotation::new(H::Asr, L::Hallucination),
            ErrorAnnotation::new(H::NoError, L::NoError),
        ]);
        assert_eq!(m.n(), 3);
        assert_eq!(m.get(H::Asr, L::NoError), 1);
        assert_eq!(m.get(H::Asr, L::Hallucination), 1);
        assert_eq!(m.get(H::NoError, L::NoError), 1);
        assert_eq!(m.counts().iter().flatten().sum::<u64>(), 3);
    }

    #[test]
    fn collapse_of_no_error_only() {
        let m = build_confusion_matrix(&[ErrorAnnotation::new(H::NoError, L::NoError); 5]);
        assert_eq!(collapse_2x2(&m), TwoByTwo::new(0, 0, 0, 5));
    }

    #[test]
    fn serde_names() {
        let a = ErrorAnnotation::new(H::Asr, L::RespondsAsHuman);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            r#"{"human_error":"ASR","llm_error":"RespondsAsHuman"}"#
        );
        assert!(serde_json::from_str::<ErrorAnnotation>(r#"{"human_error":"Typo","llm_error":"NoError"}"#).is_err());
    }

    fn annotation() -> impl Strategy<Value = ErrorAnnotation> {
        (0..3usize, 0..8usize).prop_map(|(h, l)| ErrorAnnotation::new(H::ALL[h], L::ALL[l]))
    }

    proptest! {
        #[test]
        fn marginals_match_recount(list in prop::collection::vec(annotation(), 0..300)) {
            let m = build_confusion_matrix(&list);
            prop_assert_eq!(m.n(), list.len() as u64);
            for h in H::ALL {
                let expected = list.iter().filter(|a| a.human_error == h).count() as u64;
                prop_assert_eq!(m.row_totals()[h as usize], expected);
            }
            for l in L::ALL {
                let expected = list.iter().filter(|a| a.llm_error == l).count() as u64;
                prop_assert_eq!(m.column_totals()[l as usize], expected);
            }
            prop_assert_eq!(collapse_2x2(&m).n(), m.n());
        }
    }
}
