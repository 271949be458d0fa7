//! Run manifests and replay.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::args::{Command, ReplayArgs};
use crate::{commands, write_file, CliError, CliResult};

/// Everything needed to reproduce one result file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub version: String,
    pub output_path: PathBuf,
    pub flags: Command,
}

impl RunManifest {
    pub fn new(command: &Command, output_path: &Path) -> Self {
        Self {
            subcommand: command.name().to_string(),
            seed: command.seed(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            version: env!("CARGO_PKG_VERSION").to_string(),
            output_path: output_path.to_path_buf(),
            flags: command.clone(),
        }
    }

    /// `<output>.manifest.json`.
    pub fn path_for(output_path: &Path) -> PathBuf {
        let mut name = output_path.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write(&self) -> CliResult<PathBuf> {
        let path = Self::path_for(&self.output_path);
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::Manifest(e.to_string()))?;
        write_file(&path, json.as_bytes())?;
        Ok(path)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))
    }
}

/// Re-runs a manifest. With `--check` the replayed bytes must equal the
/// recorded output file.
pub fn replay(args: &ReplayArgs) -> CliResult<i32> {
    let manifest = RunManifest::read(&args.manifest)?;
    if matches!(manifest.flags, Command::Replay(_)) {
        return Err(CliError::Manifest("a manifest cannot record a replay".into()));
    }
    let output = commands::run(&manifest.flags)?;
    let mut code = if output.passed { 0 } else { 1 };
    if args.check {
        let recorded = fs::read(&manifest.output_path).map_err(|e| CliError::io(&manifest.output_path, e))?;
        if recorded == output.bytes {
            eprintln!("replay matches {}", manifest.output_path.display());
        } else {
            eprintln!("replay differs from {}", manifest.output_path.display());
            code = 1;
        }
    }
    match (&args.out, args.check) {
        (Some(path), _) => write_file(path, &output.bytes)?,
        (None, false) => write_file(&manifest.output_path, &output.bytes)?,
        (None, true) => {}
    }
    eprintln!("{}", output.summary);
    Ok(code)
}
