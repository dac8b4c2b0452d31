use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Conversation engine for an expressive social robot.
#[derive(Debug, Parser)]
#[command(name = "emotalk", version, about)]
pub struct Cli {
    /// TOML config file. `EMOTALK_*` environment variables override it and
    /// flags override both.
    #[arg(long, global = true, env = "EMOTALK_CONFIG")]
    pub config: Option<PathBuf>,

    /// Use the offline canned LLM instead of the configured endpoint.
    #[arg(long, global = true)]
    pub mock_llm: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Talk to the robot in the terminal.
    Chat(ChatArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Print a behavior script for each line of a text file.
    Annotate(AnnotateArgs),
    /// Re-derive every turn of a transcript and compare with what was stored.
    Replay(ReplayArgs),
    /// Error analysis over annotation side-cars.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct ChatArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Where to write the transcript. Defaults to `<transcript_dir>/<session id>.jsonl`.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long)]
    pub session_id: Option<String>,
    #[arg(long)]
    pub turn_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Input file, one utterance per line.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub transcript: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Annotation side-car files; several annotators are majority-merged.
    #[arg(long, required = true, num_args = 1..)]
    pub annotations: Vec<PathBuf>,
    /// Transcripts whose turns must all be annotated.
    #[arg(long, num_args = 1..)]
    pub transcripts: Vec<PathBuf>,
    /// Coded free-text feedback.
    #[arg(long)]
    pub feedback: Option<PathBuf>,
    /// Apply Yates' continuity correction.
    #[arg(long)]
    pub yates: bool,
    /// Print the machine-readable report instead of text.
    #[arg(long)]
    pub json: bool,
    /// Also print annotation suggestions for the transcripts.
    #[arg(long)]
    pub suggest: bool,
}
