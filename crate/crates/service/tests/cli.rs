use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn study(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/study")
        .join(name)
}

/// Runs the binary in `dir` with no inherited `EMOTALK_*` settings.
fn emotalk(dir: &Path, args: &[&str], stdin: &str) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_emotalk"));
    for (key, _) in std::env::vars() {
        if key.starts_with("EMOTALK_") {
            cmd.env_remove(key);
        }
    }
    let mut child = cmd
        .args(args)
        .current_dir(dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn analyze_bundled_study_data() {
    let dir = tempfile::tempdir().unwrap();
    let ann = study("annotations.jsonl");
    let out = emotalk(
        dir.path(),
        &["analyze", "--annotations", ann.to_str().unwrap(), "--json"],
        "",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["n"], 396);
    assert_eq!(report["chi_square"]["status"], "computed");
    assert!(report["chi_square"]["p"].as_f64().unwrap() > 0.05);
    assert_eq!(report["unresolved"].as_array().unwrap().len(), 0);
}

#[test]
fn analyze_missing_annotations_fails_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = emotalk(dir.path(), &["analyze", "--annotations", "nope.jsonl"], "");
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nope.jsonl"), "{}", stderr(&out));
}

#[test]
fn analyze_requires_every_transcript_turn_annotated() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("t.jsonl");
    let chat = emotalk(
        dir.path(),
        &[
            "--mock-llm",
            "chat",
            "--session-id",
            "s",
            "--transcript",
            "t.jsonl",
            "--turn-limit",
            "2",
        ],
        "hi\nhow are you\n",
    );
    assert!(chat.status.success(), "{}", stderr(&chat));
    std::fs::write(
        dir.path().join("a.jsonl"),
        r#"{"session_id":"s","index":1,"human_error":"NoError","llm_error":"NoError","annotator":"a"}"#,
    )
    .unwrap();
    let out = emotalk(
        dir.path(),
        &[
            "analyze",
            "--annotations",
            "a.jsonl",
            "--transcripts",
            transcript.to_str().unwrap(),
        ],
        "",
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("s#2"), "{}", stderr(&out));
}

#[test]
fn single_turn_table_is_reported_as_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("a.jsonl"),
        r#"{"session_id":"s","index":1,"human_error":"ASR","llm_error":"Hallucination","annotator":"a"}"#,
    )
    .unwrap();
    let out = emotalk(dir.path(), &["analyze", "--annotations", "a.jsonl"], "");
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("not computed (degenerate table"), "{text}");
    assert!(text.contains("a=1 b=0 c=0 d=0"), "{text}");
}

#[test]
fn annotate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("in.txt"),
        "😡 That's not fair!\nWhoa 😮 no way\n\nOk.\n",
    )
    .unwrap();
    let run = || emotalk(dir.path(), &["annotate", "--in", "in.txt", "--seed", "4"], "");
    let (a, b) = (run(), run());
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<serde_json::Value> = stdout(&a).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(
        lines[0]["script"][0],
        serde_json::json!({"kind": "action", "routine": "anger", "emoji": "😡"})
    );
    assert_eq!(lines[2]["line"], 4);

    std::fs::write(dir.path().join("empty.txt"), "").unwrap();
    let out = emotalk(dir.path(), &["annotate", "--in", "empty.txt"], "");
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn chat_runs_to_the_turn_limit_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let input: String = (1..=13).map(|i| format!("message number {i}\n")).collect();
    let out = emotalk(
        dir.path(),
        &["--mock-llm", "chat", "--session-id", "full", "--seed", "5"],
        &input,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Haru [11/11]"), "{text}");
    assert!(!text.contains("Haru [12/"), "{text}");
    assert!(text.contains("Session over after 11 turns."), "{text}");

    let path = dir.path().join("transcripts/full.jsonl");
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 11);
    let replay = emotalk(dir.path(), &["replay", "--transcript", path.to_str().unwrap()], "");
    assert!(replay.status.success(), "{}", stdout(&replay));
    assert!(stdout(&replay).contains("11 of 11 turns replayed identically"));
}

#[test]
fn end_of_input_keeps_completed_turns() {
    let dir = tempfile::tempdir().unwrap();
    let out = emotalk(
        dir.path(),
        &["--mock-llm", "chat", "--session-id", "eof"],
        "hello\n\nbye\n",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(!stdout(&out).contains("Session over"));
    let saved = std::fs::read_to_string(dir.path().join("transcripts/eof.jsonl")).unwrap();
    assert_eq!(saved.lines().count(), 2);
}

#[test]
fn replay_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let out = emotalk(
        dir.path(),
        &["--mock-llm", "chat", "--session-id", "r", "--transcript", "r.jsonl"],
        "I am so happy\n",
    );
    assert!(out.status.success());
    let path = dir.path().join("r.jsonl");
    let mut record: serde_json::Value = serde_json::from_str(std::fs::read_to_string(&path).unwrap().trim()).unwrap();
    record["script"] = serde_json::json!([{"kind": "speech", "text": "edited", "genre": "default"}]);
    record["emotions"] = serde_json::json!([{"label": "neutral", "confidence": 0.0}]);
    std::fs::write(&path, format!("{record}\n")).unwrap();
    let replay = emotalk(dir.path(), &["replay", "--transcript", "r.jsonl"], "");
    assert_eq!(replay.status.code(), Some(2));
    assert!(stdout(&replay).contains("MISMATCH script"), "{}", stdout(&replay));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[session]\nturn_limt = 3\n").unwrap();
    let out = emotalk(dir.path(), &["--config", "c.toml", "--mock-llm", "chat"], "");
    assert!(!out.status.success());
    assert!(stderr(&out).contains("turn_limt"), "{}", stderr(&out));
}
