use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use emotalk_core::analysis::{
    analyze, read_annotations, read_feedback, suggest_annotations, AnalysisReport, AnnotationRecord,
};
use emotalk_core::behavior::{annotate_or_default, seeded_rng, BehaviorScript, MappingConfig, ScriptElement};
use emotalk_core::config::AppConfig;
use emotalk_core::emotion::{EmotionClassifier, EmotionPrediction};
use emotalk_core::orchestrator::{
    persist_transcript, read_transcript, replay_records, turn_seed, Engine, Session, SessionConfig, SessionError, Turn,
    TurnRecord,
};

use crate::cli::AnalyzeArgs;

pub fn build_engine(config: &AppConfig) -> anyhow::Result<Engine> {
    Ok(Engine::new(config.classifier()?, config.llm_client()))
}

#[derive(Serialize)]
struct AnnotatedLine<'a> {
    line: usize,
    text: &'a str,
    script: &'a BehaviorScript,
    emotions: Vec<EmotionPrediction>,
}

/// Writes one JSON object per non-blank input line. Line `n` (from 1) is
/// annotated with the seed derived from `(seed, n)`.
pub fn annotate_lines<W: Write>(
    input: &str,
    seed: u64,
    classifier: &dyn EmotionClassifier,
    mapping: &MappingConfig,
    mut out: W,
) -> io::Result<()> {
    for (i, text) in input.lines().enumerate() {
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        let line = i + 1;
        let mut rng = seeded_rng(turn_seed(seed, line as u32));
        let (script, _) = annotate_or_default(text, classifier, mapping, &mut rng);
        let record = AnnotatedLine {
            line,
            text,
            script: &script,
            emotions: script.emotions(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Prints one line per record; returns whether every record replayed
/// identically.
pub fn replay_transcript<W: Write>(
    records: &[TurnRecord],
    classifier: &dyn EmotionClassifier,
    mapping: &MappingConfig,
    human_tag: &str,
    mut out: W,
) -> io::Result<bool> {
    let outcomes = replay_records(records, classifier, mapping, human_tag);
    let mut all = true;
    for o in &outcomes {
        let status = match (o.guard_matches, o.script_matches) {
            (true, true) => "ok",
            (false, true) => "MISMATCH guard",
            (true, false) => "MISMATCH script",
            (false, false) => "MISMATCH guard+script",
        };
        all &= o.matches();
        writeln!(out, "{}#{} {status}", o.session_id, o.index)?;
    }
    writeln!(
        out,
        "{} of {} turns replayed identically",
        outcomes.iter().filter(|o| o.matches()).count(),
        outcomes.len()
    )?;
    Ok(all)
}

pub fn load_transcripts(paths: &[PathBuf]) -> anyhow::Result<Vec<TurnRecord>> {
    let mut records = Vec::new();
    for p in paths {
        records.extend(read_transcript(p).with_context(|| format!("reading transcript {}", p.display()))?);
    }
    Ok(records)
}

pub fn build_report(args: &AnalyzeArgs) -> anyhow::Result<AnalysisReport> {
    let mut annotations: Vec<AnnotationRecord> = Vec::new();
    for p in &args.annotations {
        annotations.extend(read_annotations(p)?);
    }
    let transcripts = load_transcripts(&args.transcripts)?;
    let feedback = args.feedback.as_ref().map(read_feedback).transpose()?;
    let report = analyze(
        &annotations,
        (!args.transcripts.is_empty()).then_some(transcripts.as_slice()),
        feedback.as_deref(),
        args.yates,
    )
    .context("annotate the listed turns in a side-car file (session_id, index, human_error, llm_error, annotator)")?;
    Ok(report)
}

/// The full `analyze` output.
pub fn analyze_output(args: &AnalyzeArgs, mapping: &MappingConfig, human_tag: &str) -> anyhow::Result<String> {
    let report = build_report(args)?;
    let mut out = if args.json {
        serde_json::to_string_pretty(&report)? + "\n"
    } else {
        report.render_text()
    };
    if args.suggest {
        let transcripts = load_transcripts(&args.transcripts)?;
        let suggestions = suggest_annotations(&transcripts, human_tag, mapping, None);
        if args.json {
            for s in suggestions {
                out.push_str(&serde_json::to_string(&s)?);
                out.push('\n');
            }
        } else {
            out.push_str("\nSuggested LLM error flags (review before use):\n");
            for s in suggestions.iter().filter(|s| !s.flags.is_empty()) {
                let names: Vec<_> = s.flags.iter().map(|f| f.label()).collect();
                out.push_str(&format!("  {}#{}: {}\n", s.session_id, s.index, names.join(", ")));
            }
        }
    }
    Ok(out)
}

/// Terminal rendering of one robot turn.
pub fn render_turn(turn: &Turn, turn_limit: usize) -> String {
    let mut out = format!("Haru [{}/{turn_limit}]\n", turn.index);
    for element in &turn.script.elements {
        match element {
            ScriptElement::Speech { text, genre, .. } => out.push_str(&format!("  [{genre}] {text}\n")),
            ScriptElement::Action { routine, .. } => out.push_str(&format!("  ⟨routine: {routine}⟩\n")),
        }
    }
    out
}

pub struct ChatOptions {
    pub session_id: Option<String>,
    /// Explicit transcript file; otherwise `<transcript_dir>/<id>.jsonl`.
    pub transcript: Option<PathBuf>,
    pub transcript_dir: PathBuf,
}

impl ChatOptions {
    fn transcript_path(&self, session: &Session) -> PathBuf {
        self.transcript
            .clone()
            .unwrap_or_else(|| self.transcript_dir.join(format!("{}.jsonl", session.id())))
    }
}

fn save(session: &Session, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    persist_transcript(session, path).with_context(|| format!("writing transcript {}", path.display()))
}

/// Console conversation. Returns the finished session.
///
/// Blank lines re-prompt without using a turn. LLM failures are reported
/// and the same session continues. The transcript is rewritten after every
/// turn, so end of input leaves it complete.
pub fn chat_loop<R: BufRead, W: Write>(
    engine: &Engine,
    config: SessionConfig,
    options: &ChatOptions,
    input: R,
    mut out: W,
) -> anyhow::Result<Session> {
    let mut session = match &options.session_id {
        Some(id) => engine.create_session_with_id(id.clone(), config)?,
        None => engine.create_session(config)?,
    };
    let limit = session.config().turn_limit;
    let path = options.transcript_path(&session);
    writeln!(out, "Session {} ({limit} turns). Ctrl-D to quit.", session.id())?;

    let mut lines = input.lines();
    while session.is_open() {
        write!(out, "you> ")?;
        out.flush()?;
        let Some(line) = lines.next().transpose()? else {
            writeln!(out)?;
            break;
        };
        match engine.step(&mut session, &line) {
            Ok(turn) => {
                out.write_all(render_turn(turn, limit).as_bytes())?;
                save(&session, &path)?;
            }
            Err(SessionError::EmptyInput) => continue,
            Err(err @ (SessionError::LlmUnavailable { .. } | SessionError::LlmProtocol(_))) => {
                writeln!(out, "! {err}. Nothing was recorded; try again.")?;
            }
            Err(err) => return Err(err.into()),
        }
    }
    if !session.is_open() {
        writeln!(out, "Session over after {} turns.", session.turns().len())?;
    }
    if session.turns().is_empty() {
        writeln!(out, "No turns; no transcript written.")?;
    } else {
        writeln!(out, "Transcript: {}", path.display())?;
    }
    out.flush()?;
    Ok(session)
}
