//! Command-line and HTTP front ends for `emotalk-core`.

pub mod api;
pub mod cli;
pub mod commands;

use emotalk_core::config::{AppConfig, LlmBackendKind};

use cli::Cli;

/// Config file, then environment, then global flags.
pub fn resolve_config(cli: &Cli) -> anyhow::Result<AppConfig> {
    let mut config = AppConfig::load(cli.config.as_deref())?;
    if cli.mock_llm {
        config.llm.backend = LlmBackendKind::Canned;
    }
    Ok(config)
}
