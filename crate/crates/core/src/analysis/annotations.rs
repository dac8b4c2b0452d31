use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnalysisError, ErrorAnnotation, HumanErrorType, LlmErrorType};
use crate::behavior::{count_sentences, cut_at_tag, repeats_recent, MappingConfig};
use crate::orchestrator::TurnRecord;

/// One annotator's label for one turn, stored beside the transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub session_id: String,
    pub index: u32,
    pub human_error: HumanErrorType,
    pub llm_error: LlmErrorType,
    pub annotator: String,
}

impl AnnotationRecord {
    pub fn annotation(&self) -> ErrorAnnotation {
        ErrorAnnotation::new(self.human_error, self.llm_error)
    }
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>, AnalysisError> {
    super::read_jsonl(path.as_ref())
}

pub fn write_annotations(path: impl AsRef<Path>, records: &[AnnotationRecord]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MergedAnnotation {
    pub session_id: String,
    pub index: u32,
    pub annotation: ErrorAnnotation,
}

/// A turn whose annotators did not reach a strict majority on one of the
/// two labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnresolvedAnnotation {
    pub session_id: String,
    pub index: u32,
    pub votes: Vec<AnnotationRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MergeOutcome {
    pub merged: Vec<MergedAnnotation>,
    pub unresolved: Vec<UnresolvedAnnotation>,
}

fn majority<T: Copy + Eq + std::hash::Hash>(votes: impl Iterator<Item = T>) -> Option<T> {
    let mut counts: HashMap<T, usize> = HashMap::new();
    let mut total = 0;
    for v in votes {
        *counts.entry(v).or_default() += 1;
        total += 1;
    }
    counts.into_iter().find(|&(_, c)| c * 2 > total).map(|(v, _)| v)
}

/// Merges records from any number of annotators, per turn and per label,
/// by strict majority. A later record from the same annotator for the same
/// turn replaces the earlier one. Output is ordered by (session, index).
pub fn merge_majority(records: &[AnnotationRecord]) -> MergeOutcome {
    let mut by_turn: BTreeMap<(&str, u32), Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        let votes = by_turn.entry((r.session_id.as_str(), r.index)).or_default();
        match votes.iter_mut().find(|v| v.annotator == r.annotator) {
            Some(slot) => *slot = r,
            None => votes.push(r),
        }
    }

    let mut out = MergeOutcome::default();
    for ((session_id, index), votes) in by_turn {
        let human = majority(votes.iter().map(|v| v.human_error));
        let llm = majority(votes.iter().map(|v| v.llm_error));
        match (human, llm) {
            (Some(h), Some(l)) => out.merged.push(MergedAnnotation {
                session_id: session_id.to_string(),
                index,
                annotation: ErrorAnnotation::new(h, l),
            }),
            _ => out.unresolved.push(UnresolvedAnnotation {
                session_id: session_id.to_string(),
                index,
                votes: votes.into_iter().cloned().collect(),
            }),
        }
    }
    out
}

/// Machine hints for annotators. Never final labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Suggestion {
    pub session_id: String,
    pub index: u32,
    pub flags: Vec<LlmErrorType>,
}

/// Flags likely LLM errors in transcript records.
///
/// `RespondsAsHuman` when the raw reply contains a line starting with the
/// human tag, `RepeatsPreviousLine` when the reply matches a recent robot
/// line of the same session, `ReplyTooLong` when it has more than
/// `sentence_cap` sentences (falls back to the mapping's cap; no check if
/// neither is set).
pub fn suggest_annotations(
    records: &[TurnRecord],
    human_tag: &str,
    config: &MappingConfig,
    sentence_cap: Option<usize>,
) -> Vec<Suggestion> {
    let cap = sentence_cap.or(config.max_sentences_per_response());
    let mut robot_lines: HashMap<&str, Vec<String>> = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for record in records {
        let history = robot_lines.entry(record.session_id.as_str()).or_default();
        let cut = cut_at_tag(&record.llm_raw, human_tag);
        let reply = cut.as_deref().unwrap_or(&record.llm_raw);

        let mut flags = Vec::new();
        if cut.is_some() {
            flags.push(LlmErrorType::RespondsAsHuman);
        }
        if repeats_recent(reply, history, config.repeat_similarity_threshold()) {
            flags.push(LlmErrorType::RepeatsPreviousLine);
        }
        if cap.is_some_and(|cap| count_sentences(reply) > cap) {
            flags.push(LlmErrorType::ReplyTooLong);
        }
        history.push(record.guarded_text.clone());
        out.push(Suggestion {
            session_id: record.session_id.clone(),
            index: record.index,
            flags,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::BehaviorScript;
    use crate::orchestrator::GuardFlags;
    use HumanErrorType as H;
    use LlmErrorType as L;

    fn rec(session: &str, index: u32, h: H, l: L, who: &str) -> AnnotationRecord {
        AnnotationRecord {
            session_id: session.into(),
            index,
            human_error: h,
            llm_error: l,
            annotator: who.into(),
        }
    }

    fn turn(index: u32, raw: &str) -> TurnRecord {
        TurnRecord {
            session_id: "s".into(),
            index,
            human_text: "hi".into(),
            llm_raw: raw.into(),
            guarded_text: cut_at_tag(raw, "Human:").unwrap_or_else(|| raw.to_string()),
            guard_flags: GuardFlags::default(),
            script: BehaviorScript::default(),
            emotions: Vec::new(),
            seed: 0,
            t_request: 0,
            t_response: 0,
            error_annotation: None,
        }
    }

    #[test]
    fn majority_merge_and_unresolved() {
        let records = [
            rec("s", 1, H::Asr, L::NoError, "a"),
            rec("s", 1, H::Asr, L::NoError, "b"),
            rec("s", 1, H::NoError, L::NoError, "c"),
            rec("s", 2, H::NoError, L::Hallucination, "a"),
            rec("s", 2, H::NoError, L::NoError, "b"),
            rec("s", 2, H::NoError, L::Misunderstood, "c"),
        ];
        let out = merge_majority(&records);
        assert_eq!(
            out.merged,
            vec![MergedAnnotation {
                session_id: "s".into(),
                index: 1,
                annotation: ErrorAnnotation::new(H::Asr, L::NoError)
            }]
        );
        assert_eq!(out.unresolved.len(), 1);
        assert_eq!(out.unresolved[0].index, 2);
        assert_eq!(out.unresolved[0].votes.len(), 3);
    }

    #[test]
    fn two_way_split_is_unresolved_and_relabels_replace() {
        let split = [
            rec("s", 1, H::Asr, L::NoError, "a"),
            rec("s", 1, H::NoError, L::NoError, "b"),
        ];
        assert_eq!(merge_majority(&split).unresolved.len(), 1);

        let relabel = [
            rec("s", 1, H::Asr, L::NoError, "a"),
            rec("s", 1, H::NoError, L::NoError, "a"),
        ];
        let out = merge_majority(&relabel);
        assert_eq!(out.merged[0].annotation.human_error, H::NoError);
    }

    #[test]
    fn annotation_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let records = vec![rec("s", 1, H::NoInputCaptured, L::RepeatsPreviousLine, "a")];
        write_annotations(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "{\"session_id\":\"s\",\"index\":1,\"human_error\":\"NoInputCaptured\",\"llm_error\":\"RepeatsPreviousLine\",\"annotator\":\"a\"}\n"
        );
        assert_eq!(read_annotations(&path).unwrap(), records);
    }

    #[test]
    fn suggestions() {
        let cfg = MappingConfig::shipped();
        let records = [
            turn(1, "I love magnets! 😊"),
            turn(2, "Sure!\nHuman: and then?"),
            turn(3, "I love magnets! 😊"),
            turn(4, "One. Two. Three. Four. Five. Six. Seven. Eight. Nine. Ten."),
        ];
        let flags: Vec<_> = suggest_annotations(&records, "Human:", &cfg, Some(4))
            .into_iter()
            .map(|s| s.flags)
            .collect();
        assert_eq!(
            flags,
            vec![
                vec![],
                vec![L::RespondsAsHuman],
                vec![L::RepeatsPreviousLine],
                vec![L::ReplyTooLong]
            ]
        );
    }

    #[test]
    fn no_length_check_without_cap() {
        let records = [turn(1, "One. Two. Three. Four. Five. Six.")];
        let s = suggest_annotations(
            &records,
            "Human:",
            &MappingConfig::shipped().with_max_sentences(None),
            None,
        );
        assert!(s[0].flags.is_empty());
    }
}
