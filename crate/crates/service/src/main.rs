use std::io::{self, BufWriter};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;
use tracing_subscriber::EnvFilter;

use emotalk::api::{self, ApiState};
use emotalk::cli::{Cli, Command};
use emotalk::commands::{self, ChatOptions};
use emotalk::resolve_config;
use emotalk_core::orchestrator::SessionHub;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::FAILURE
        }
    }
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut config = resolve_config(&cli)?;
    match cli.command {
        Command::Chat(args) => {
            if let Some(seed) = args.seed {
                config.session.seed = seed;
            }
            if let Some(limit) = args.turn_limit {
                config.session.turn_limit = limit;
            }
            let engine = commands::build_engine(&config)?;
            let options = ChatOptions {
                session_id: args.session_id,
                transcript: args.transcript,
                transcript_dir: config
                    .paths
                    .transcript_dir
                    .clone()
                    .unwrap_or_else(|| "transcripts".into()),
            };
            commands::chat_loop(
                &engine,
                config.session_config()?,
                &options,
                io::stdin().lock(),
                io::stdout(),
            )?;
        }
        Command::Serve(args) => {
            if let Some(seed) = args.seed {
                config.session.seed = seed;
            }
            let host = args.host.unwrap_or(config.server.host.clone());
            let port = args.port.unwrap_or(config.server.port);
            let hub = Arc::new(SessionHub::new(
                commands::build_engine(&config)?,
                config.session_config()?,
            ));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                api::serve(listener, ApiState::new(hub)).await?;
                anyhow::Ok(())
            })?;
        }
        Command::Annotate(args) => {
            let text =
                std::fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
            let classifier = config.classifier()?;
            commands::annotate_lines(
                &text,
                args.seed,
                classifier.as_ref(),
                &config.mapping()?,
                BufWriter::new(io::stdout()),
            )?;
        }
        Command::Replay(args) => {
            let records = emotalk_core::orchestrator::read_transcript(&args.transcript)
                .with_context(|| format!("reading {}", args.transcript.display()))?;
            let card = config.card()?;
            let classifier = config.classifier()?;
            let ok = commands::replay_transcript(
                &records,
                classifier.as_ref(),
                &config.mapping()?,
                card.human_tag(),
                io::stdout(),
            )?;
            if !ok {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Analyze(args) => {
            let card = config.card()?;
            print!(
                "{}",
                commands::analyze_output(&args, &config.mapping()?, card.human_tag())?
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
