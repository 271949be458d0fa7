//! Command-line flags.
//!
//! Every subcommand's flags are serializable so a run manifest can store
//! them verbatim and replay the run.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "qpuf-lab", version, about = "Reproducible qPUF experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Emulation forger fidelity across a sweep of μ.
    ForgeSweep(ForgeSweepArgs),
    /// Subspace adversary win rate in the selective game against (d+1)/D.
    SelectiveBound(SelectiveBoundArgs),
    /// Every numerical audit; exits 1 if any fails.
    VerifyAll(VerifyAllArgs),
    /// Plays unforgeability games and emits JSON-lines transcripts.
    Game(GameArgs),
    /// Runs the emulator once on the forger configuration and reports each stage.
    QeDemo(QeDemoArgs),
    /// Re-runs the experiment recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ForgeSweep(_) => "forge-sweep",
            Command::SelectiveBound(_) => "selective-bound",
            Command::VerifyAll(_) => "verify-all",
            Command::Game(_) => "game",
            Command::QeDemo(_) => "qe-demo",
            Command::Replay(_) => "replay",
        }
    }

    pub fn output(&self) -> Option<&Output> {
        match self {
            Command::ForgeSweep(a) => Some(&a.output),
            Command::SelectiveBound(a) => Some(&a.output),
            Command::VerifyAll(a) => Some(&a.output),
            Command::Game(a) => Some(&a.output),
            Command::QeDemo(a) => Some(&a.output),
            Command::Replay(_) => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::ForgeSweep(a) => Some(a.seed),
            Command::SelectiveBound(a) => Some(a.seed),
            Command::VerifyAll(a) => Some(a.seed),
            Command::Game(a) => Some(a.seed),
            Command::QeDemo(a) => Some(a.seed),
            Command::Replay(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct Output {
    /// Result file; a manifest is written next to it. Stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table format; each subcommand has its own default.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Output {
    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ForgeSweepArgs {
    #[arg(long, default_value_t = 3)]
    pub qubits: u32,
    /// Sweep μ = i / steps for i in 0..steps.
    #[arg(long, default_value_t = 10)]
    pub mu_steps: usize,
    /// Explicit μ values; overrides --mu-steps.
    #[arg(long, value_delimiter = ',')]
    pub mu: Vec<f64>,
    /// Haar qPUFs per μ.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SelectiveBoundArgs {
    #[arg(long, default_value_t = 3)]
    pub qubits: u32,
    /// Subspace dimensions; defaults to every d < D.
    #[arg(long, value_delimiter = ',')]
    pub d: Vec<usize>,
    /// Ideal-threshold test parameters.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub delta: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyAllArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random pairs per inequality cell.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Samples per statistical cell.
    #[arg(long, default_value_t = 100_000)]
    pub stat_trials: usize,
    /// Disturbance of the channel audited as strongly collision resistant.
    #[arg(long, default_value_t = 1e-12)]
    pub inject_epsilon: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    Random,
    Subspace,
    QeForger,
    Tomography,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Qex,
    Qsel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestChoice {
    Swap,
    Ideal,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct GameArgs {
    #[arg(long, value_enum)]
    pub adversary: AdversaryKind,
    #[arg(long, value_enum)]
    pub mode: ModeKind,
    /// Grants exact response readout; required by the tomography adversary.
    #[arg(long)]
    pub privileged: bool,
    #[arg(long, default_value_t = 3)]
    pub qubits: u32,
    /// Learning queries of the subspace adversary.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Distinguishability margin in the existential game.
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    #[arg(long, value_enum, default_value_t = TestChoice::Ideal)]
    pub test: TestChoice,
    /// Threshold of the ideal test.
    #[arg(long, default_value_t = 0.9)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub kappa1: usize,
    #[arg(long, default_value_t = 1)]
    pub kappa2: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct QeDemoArgs {
    #[arg(long, default_value_t = 2)]
    pub qubits: u32,
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Exit 1 unless the replayed output matches the recorded file byte for byte.
    #[arg(long)]
    pub check: bool,
    /// Where to write the replayed output. Without it, and without
    /// `--check`, the recorded output path is overwritten.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
