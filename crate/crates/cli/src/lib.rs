//! Experiment runner for the qPUF laboratory.
//!
//! Each subcommand renders its results to bytes; [`execute`] writes them to
//! stdout or to `--out` together with a [`RunManifest`] that replays the run.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod table;

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub use args::{Cli, Command};
pub use manifest::RunManifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] qpuf_core::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("cannot render output: {0}")]
    Render(String),
}

impl CliError {
    /// 2 for usage and parameter errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use qpuf_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Manifest(_) => 2,
            CliError::Core(
                E::InvalidParameter(_)
                | E::Precondition(_)
                | E::UnsupportedMode(_)
                | E::DimensionCap { .. }
                | E::InsufficientBudget { .. },
            ) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Rendered result of a subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub bytes: Vec<u8>,
    /// False when a checked claim failed.
    pub passed: bool,
    /// Human-readable line for stderr.
    pub summary: String,
}

/// Runs `command` and writes its output. Returns the process exit code.
pub fn execute(command: &Command) -> CliResult<i32> {
    if let Command::Replay(args) = command {
        return manifest::replay(args);
    }
    let output = commands::run(command)?;
    match command.output().and_then(|o| o.out.as_deref()) {
        Some(path) => {
            write_file(path, &output.bytes)?;
            RunManifest::new(command, path).write()?;
        }
        None => std::io::stdout()
            .write_all(&output.bytes)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e))?,
    }
    eprintln!("{}", output.summary);
    Ok(if output.passed { 0 } else { 1 })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
