use std::collections::HashSet;
use std::fmt::Write;

use serde::Serialize;

use super::{
    build_confusion_matrix, chi_square_2x2_with, collapse_2x2, merge_majority, tally_feedback, AnalysisError,
    AnnotationRecord, ChiSquare, ErrorAnnotation, ErrorConfusionMatrix, FeedbackLabel, FeedbackTally, HumanErrorType,
    LlmErrorType, Polarity, TwoByTwo,
};
use crate::orchestrator::TurnRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ChiSquareOutcome {
    Computed(ChiSquare),
    Degenerate { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub n: u64,
    pub rows: Vec<HumanErrorType>,
    pub columns: Vec<LlmErrorType>,
    pub matrix: ErrorConfusionMatrix,
    pub row_totals: [u64; 3],
    pub column_totals: [u64; 8],
    pub collapse: TwoByTwo,
    pub yates: bool,
    pub chi_square: ChiSquareOutcome,
    /// Turns left out because annotators disagreed.
    pub unresolved: Vec<(String, u32)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedback: Option<FeedbackTally>,
}

/// Builds the full error-analysis report.
///
/// Annotations are majority-merged first. With `transcripts`, every
/// transcript turn must carry an annotation (otherwise the error lists the
/// missing ones) and annotations for other turns are ignored.
pub fn analyze(
    annotations: &[AnnotationRecord],
    transcripts: Option<&[TurnRecord]>,
    feedback: Option<&[FeedbackLabel]>,
    yates: bool,
) -> Result<AnalysisReport, AnalysisError> {
    let merged = merge_majority(annotations);
    let mut kept: Vec<ErrorAnnotation> = Vec::new();
    let mut unresolved: Vec<(String, u32)> = merged
        .unresolved
        .iter()
        .map(|u| (u.session_id.clone(), u.index))
        .collect();

    match transcripts {
        Some(records) => {
            let turns: HashSet<(&str, u32)> = records.iter().map(|r| (r.session_id.as_str(), r.index)).collect();
            let annotated: HashSet<(&str, u32)> = merged
                .merged
                .iter()
                .map(|m| (m.session_id.as_str(), m.index))
                .chain(merged.unresolved.iter().map(|u| (u.session_id.as_str(), u.index)))
                .collect();
            let missing: Vec<(String, u32)> = records
                .iter()
                .filter(|r| !annotated.contains(&(r.session_id.as_str(), r.index)))
                .map(|r| (r.session_id.clone(), r.index))
                .collect();
            if !missing.is_empty() {
                return Err(AnalysisError::Unannotated(missing));
            }
            kept.extend(
                merged
                    .merged
                    .iter()
                    .filter(|m| turns.contains(&(m.session_id.as_str(), m.index)))
                    .map(|m| m.annotation),
            );
            unresolved.retain(|(s, i)| turns.contains(&(s.as_str(), *i)));
        }
        None => kept.extend(merged.merged.iter().map(|m| m.annotation)),
    }
    if kept.is_empty() && unresolved.is_empty() {
        return Err(AnalysisError::NoAnnotations);
    }

    let matrix = build_confusion_matrix(&kept);
    let collapse = collapse_2x2(&matrix);
    let chi_square = match chi_square_2x2_with(&collapse, yates) {
        Ok(result) => ChiSquareOutcome::Computed(result),
        Err(err) => ChiSquareOutcome::Degenerate {
            reason: err.to_string(),
        },
    };
    Ok(AnalysisReport {
        n: matrix.n(),
        rows: HumanErrorType::ALL.to_vec(),
        columns: LlmErrorType::ALL.to_vec(),
        row_totals: matrix.row_totals(),
        column_totals: matrix.column_totals(),
        matrix,
        collapse,
        yates,
        chi_square,
        unresolved,
        feedback: feedback.map(tally_feedback),
    })
}

impl AnalysisReport {
    /// Plain-text rendering for terminals.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let first = HumanErrorType::ALL
            .iter()
            .map(|h| h.label().len())
            .max()
            .unwrap_or(0)
            .max(5);
        let widths: Vec<usize> = LlmErrorType::ALL.iter().map(|l| l.label().len().max(4)).collect();

        let _ = writeln!(
            out,
            "Confusion matrix: human errors (rows) x LLM errors (columns), N = {}",
            self.n
        );
        let _ = write!(out, "{:first$}", "");
        for (l, w) in LlmErrorType::ALL.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$}", l.label());
        }
        let _ = writeln!(out, "  {:>5}", "Total");
        for h in HumanErrorType::ALL {
            let _ = write!(out, "{:first$}", h.label());
            for (c, w) in self.matrix.row(h).iter().zip(&widths) {
                let _ = write!(out, "  {c:>w$}");
            }
            let _ = writeln!(out, "  {:>5}", self.row_totals[h as usize]);
        }
        let _ = write!(out, "{:first$}", "Total");
        for (c, w) in self.column_totals.iter().zip(&widths) {
            let _ = write!(out, "  {c:>w$}");
        }
        let _ = writeln!(out, "  {:>5}", self.n);

        let t = &self.collapse;
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Collapsed 2x2 (human error yes/no x LLM error yes/no): a={} b={} c={} d={}",
            t.a, t.b, t.c, t.d
        );
        let correction = if self.yates {
            "Yates-corrected"
        } else {
            "no continuity correction"
        };
        match &self.chi_square {
            ChiSquareOutcome::Computed(r) => {
                let _ = writeln!(
                    out,
                    "Chi-square ({correction}): chi2({}, N = {}) = {:.4}, p = {:.4}",
                    r.df, self.n, r.statistic, r.p
                );
            }
            ChiSquareOutcome::Degenerate { reason } => {
                let _ = writeln!(out, "Chi-square: not computed ({reason})");
            }
        }
        if !self.unresolved.is_empty() {
            let _ = writeln!(
                out,
                "Unresolved (annotators disagree, excluded): {}",
                self.unresolved.len()
            );
            for (s, i) in &self.unresolved {
                let _ = writeln!(out, "  {s}#{i}");
            }
        }

        if let Some(feedback) = &self.feedback {
            for polarity in [Polarity::Positive, Polarity::Negative] {
                let _ = writeln!(out);
                let _ = writeln!(out, "Feedback ({polarity}), total {}", feedback.total(polarity));
                for c in feedback.side(polarity) {
                    let _ = writeln!(out, "  {:<45} {:>3}", c.category, c.count);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use HumanErrorType as H;
    use LlmErrorType as L;

    fn rec(index: u32, h: H, l: L) -> AnnotationRecord {
        AnnotationRecord {
            session_id: "s".into(),
            index,
            human_error: h,
            llm_error: l,
            annotator: "a".into(),
        }
    }

    #[test]
    fn single_turn_is_degenerate() {
        let report = analyze(&[rec(1, H::NoError, L::NoError)], None, None, false).unwrap();
        assert_eq!(report.n, 1);
        assert_eq!(report.matrix.get(H::NoError, L::NoError), 1);
        assert!(matches!(report.chi_square, ChiSquareOutcome::Degenerate { .. }));
        assert!(report.render_text().contains("not computed"));
    }

    #[test]
    fn nothing_to_analyze() {
        assert!(matches!(
            analyze(&[], None, None, false),
            Err(AnalysisError::NoAnnotations)
        ));
    }

    #[test]
    fn json_shape() {
        let report = analyze(
            &[
                rec(1, H::Asr, L::NoError),
                rec(2, H::NoError, L::Hallucination),
                rec(3, H::NoError, L::NoError),
                rec(4, H::Asr, L::Misunderstood),
            ],
            None,
            None,
            false,
        )
        .unwrap();
        let v = serde_json::to_value(&report).unwrap();
        assert_eq!(v["chi_square"]["status"], "computed");
        assert_eq!(v["chi_square"]["df"], 1);
        assert_eq!(v["collapse"], serde_json::json!({"a":1,"b":1,"c":1,"d":1}));
        assert_eq!(v["rows"][0], "ASR");
        assert!(v.get("feedback").is_none());
    }
}
