//! Front end for the `nucspin-lab` binary: configuration files, command
//! dispatch and the CSV/JSON output formats.

use std::path::Path;

use nucspin_core::experiments::ExperimentError;
use serde_json::json;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod format;

pub use commands::{ dispatch, execute, Artifacts, Command, Format };
pub use config::{ parse_config, Config, ConfigError, Mode };

/// Environment variable consulted when neither a flag nor the config sets the seed.
pub const SEED_ENV: &str = "NUCSPIN_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown command `{0}`")]
    UnknownCommand(String),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Experiment(#[from] ExperimentError),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), message: e.to_string() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::UnknownCommand(_) => "unknown_command",
            Self::Usage(_) => "usage",
            Self::Config(_) => "config",
            Self::Experiment(_) => "experiment",
            Self::Io { .. } => "io",
            Self::Serialize(_) => "serialize",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::UnknownCommand(_) | Self::Usage(_) => 2,
            Self::Config(_) => 3,
            Self::Experiment(_) => 4,
            Self::Io { .. } | Self::Serialize(_) => 5,
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json_line(&self) -> String {
        let mut err = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            Self::Config(c) => {
                err["code"] = json!(c.kind.code());
                if c.line > 0 {
                    err["line"] = json!(c.line);
                }
                if let Some(key) = &c.key {
                    err["key"] = json!(key);
                }
            }
            Self::Io { path, .. } => err["path"] = json!(path),
            _ => {}
        }
        json!({ "error": err }).to_string()
    }
}

/// Apply `--flag` style overrides on top of a parsed config. Each override is
/// (config key, value); errors are reported against the flag rather than a line.
pub fn apply_overrides(cfg: &mut Config, overrides: &[(&str, String)]) -> Result<(), CliError> {
    for (key, value) in overrides {
        cfg.set(key, value).map_err(|kind| ConfigError { line: 0, key: Some(key.to_string()), kind })?;
    }
    cfg.validate()?;
    Ok(())
}

/// Seed precedence: flag or config file first, then the environment, then 0.
pub fn resolve_seed(cfg: &mut Config, env: Option<&str>) -> Result<(), CliError> {
    if cfg.seed.is_none() {
        if let Some(raw) = env.map(str::trim).filter(|s| !s.is_empty()) {
            let seed = raw.parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{raw}` is not a u64 seed")))?;
            cfg.seed = Some(seed);
        }
    }
    if cfg.seed.is_none() {
        cfg.seed = Some(0);
    }
    Ok(())
}
