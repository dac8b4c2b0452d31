use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::session::{Session, Turn};
use crate::analysis::ErrorAnnotation;
use crate::behavior::{
    annotate_default, annotate_or_default, apply_guards, seeded_rng, BehaviorScript, GuardReport, MappingConfig,
};
use crate::emotion::{EmotionClassifier, EmotionPrediction};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardFlags {
    pub stripped_human_turn: bool,
    pub repeated_previous_line: bool,
    pub truncated_for_length: bool,
    pub regenerated: bool,
    pub classifier_fallback: bool,
}

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub session_id: String,
    pub index: u32,
    pub human_text: String,
    pub llm_raw: String,
    pub guarded_text: String,
    pub guard_flags: GuardFlags,
    pub script: BehaviorScript,
    pub emotions: Vec<EmotionPrediction>,
    pub seed: u64,
    pub t_request: u64,
    pub t_response: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_annotation: Option<ErrorAnnotation>,
}

impl TurnRecord {
    pub fn from_turn(session_id: &str, turn: &Turn) -> Self {
        Self {
            session_id: session_id.to_string(),
            index: turn.index,
            human_text: turn.human_text.clone(),
            llm_raw: turn.llm_raw.clone(),
            guarded_text: turn.guard.guarded_text.clone(),
            guard_flags: GuardFlags {
                stripped_human_turn: turn.guard.stripped_human_turn,
                repeated_previous_line: turn.guard.repeated_previous_line,
                truncated_for_length: turn.guard.truncated_for_length,
                regenerated: turn.regenerated,
                classifier_fallback: turn.classifier_fallback,
            },
            script: turn.script.clone(),
            emotions: turn.emotion_trace(),
            seed: turn.seed_used,
            t_request: turn.t_request,
            t_response: turn.t_response,
            error_annotation: turn.error_annotation,
        }
    }

    /// The stored script with its per-sentence emotions re-attached.
    pub fn full_script(&self) -> BehaviorScript {
        self.script.clone().with_emotions(&self.emotions)
    }
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("session has no turns to persist")]
    EmptySession,
    #[error("transcript storage error: {0}")]
    Storage(#[from] std::io::Error),
    #[error("transcript line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub fn transcript_records(session: &Session) -> Vec<TurnRecord> {
    session
        .turns()
        .iter()
        .map(|t| TurnRecord::from_turn(session.id(), t))
        .collect()
}

/// Writes one JSON object per line.
pub fn write_records<W: Write>(records: &[TurnRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Writes the session's transcript to `path`, replacing any existing file.
pub fn persist_transcript(session: &Session, path: impl AsRef<Path>) -> Result<(), TranscriptError> {
    if session.turns().is_empty() {
        return Err(TranscriptError::EmptySession);
    }
    let file = std::fs::File::create(path)?;
    write_records(&transcript_records(session), std::io::BufWriter::new(file))?;
    Ok(())
}

/// Parses records and re-attaches each script's stored emotions.
pub fn parse_records<R: BufRead>(input: R) -> Result<Vec<TurnRecord>, TranscriptError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record: TurnRecord =
            serde_json::from_str(&line).map_err(|source| TranscriptError::Parse { line: i + 1, source })?;
        record.script = record.full_script();
        out.push(record);
    }
    Ok(out)
}

pub fn read_transcript(path: impl AsRef<Path>) -> Result<Vec<TurnRecord>, TranscriptError> {
    parse_records(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Result of re-deriving one stored turn.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub session_id: String,
    pub index: u32,
    pub guard: GuardReport,
    pub script: BehaviorScript,
    pub guard_matches: bool,
    /// Script and emotions serialize to the same bytes as stored.
    pub script_matches: bool,
}

impl ReplayOutcome {
    pub fn matches(&self) -> bool {
        self.guard_matches && self.script_matches
    }
}

/// Re-runs guards and annotation for every record from its stored raw reply
/// and seed. Records may span sessions; each session's robot history is
/// rebuilt from its own earlier records.
pub fn replay_records(
    records: &[TurnRecord],
    classifier: &dyn EmotionClassifier,
    mapping: &MappingConfig,
    human_tag: &str,
) -> Vec<ReplayOutcome> {
    let mut robot_lines: HashMap<&str, Vec<String>> = HashMap::new();
    records
        .iter()
        .map(|record| {
            let history = robot_lines.entry(record.session_id.as_str()).or_default();
            let guard = apply_guards(&record.llm_raw, history, human_tag, mapping);
            history.push(record.guarded_text.clone());

            let mut rng = seeded_rng(record.seed);
            let script = if record.guard_flags.classifier_fallback {
                annotate_default(&record.guarded_text, mapping, &mut rng)
            } else {
                annotate_or_default(&record.guarded_text, classifier, mapping, &mut rng).0
            };

            let stored = GuardFlags {
                regenerated: false,
                classifier_fallback: false,
                ..record.guard_flags
            };
            let derived = GuardFlags {
                stripped_human_turn: guard.stripped_human_turn,
                repeated_previous_line: guard.repeated_previous_line,
                truncated_for_length: guard.truncated_for_length,
                ..GuardFlags::default()
            };
            let guard_matches = stored == derived && guard.guarded_text == record.guarded_text;
            let script_matches =
                to_json(&script) == to_json(&record.script) && to_json(&script.emotions()) == to_json(&record.emotions);
            ReplayOutcome {
                session_id: record.session_id.clone(),
                index: record.index,
                guard,
                script,
                guard_matches,
                script_matches,
            }
        })
        .collect()
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}
