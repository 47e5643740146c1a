//! `cqpolar`: batch front end for channel scans, code construction,
//! decoding experiments, inequality checks and MAC regions.
//!
//! Exit codes: 0 success, 1 invalid input, 2 resource cap exceeded,
//! 3 a check failed.

mod commands;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Error surfaced to the user together with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn check_failed(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<cqpolar::Error> for CliError {
    fn from(e: cqpolar::Error) -> Self {
        let code = match e {
            cqpolar::Error::Capacity { .. } => 2,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cqpolar", version, about = "Polar codes for classical-quantum channels over finite Abelian groups")]
struct Cli {
    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Channel file utilities.
    #[command(subcommand)]
    Channel(ChannelCommand),
    /// Scan every synthetic channel of depth n.
    Polarize(PolarizeArgs),
    /// Build a code plan.
    Construct(ConstructArgs),
    /// Monte Carlo block-error experiment for a plan.
    DecodeSim(DecodeSimArgs),
    /// Run the inequality fuzz suite.
    Verify(VerifyArgs),
    /// Symmetric capacity region of a multiple-access channel.
    MacRegion(MacRegionArgs),
}

#[derive(Debug, Subcommand)]
enum ChannelCommand {
    /// Parse and validate a channel file.
    Validate {
        file: PathBuf,
        /// Also write a JSON summary.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a named channel family to a channel file.
    Preset {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    ClassicalSymmetric,
    PureStates,
    DepolarizedOrthogonal,
    Random,
    Erasure,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PresetArgs {
    #[arg(long, value_enum)]
    pub preset: PresetName,
    #[arg(long)]
    pub q: Option<usize>,
    /// Crossover probability of the symmetric channel.
    #[arg(long)]
    pub p: Option<f64>,
    /// Depolarizing weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Erasure probability.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Comma-separated qubit angles of the pure-state family.
    #[arg(long, value_delimiter = ',')]
    pub angles: Option<Vec<f64>>,
    /// Output dimension of the random family.
    #[arg(long)]
    pub k: Option<usize>,
    /// Seed of the random family.
    #[arg(long)]
    pub preset_seed: Option<u64>,
}

/// A channel given either as a file or as a preset.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ChannelSource {
    #[arg(long, conflicts_with = "preset")]
    pub channel: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<PresetName>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub angles: Option<Vec<f64>>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub preset_seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct PolarizeArgs {
    #[command(flatten)]
    pub source: ChannelSource,
    #[arg(long)]
    pub n: usize,
    /// CSV output, one row per branch.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON output with full fidelity tables (default: next to the CSV).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    PaperStrict,
    BestEffort,
    TopK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionName {
    Random,
    Zero,
}

#[derive(Debug, Args, Serialize)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub source: ChannelSource,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.2)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.4)]
    pub beta_prime: f64,
    #[arg(long, value_enum, default_value_t = ModeName::BestEffort)]
    pub mode: ModeName,
    /// Fidelity threshold of the best-effort mode.
    #[arg(long, default_value_t = 1e-3)]
    pub tau: f64,
    /// Number of unfrozen branches in top-k mode (default N/2).
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = SectionName::Zero)]
    pub sections: SectionName,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Try the section maps of seeds `seed..seed+count` and keep the one
    /// with the lowest empirical block error.
    #[arg(long)]
    pub search_sections: Option<u64>,
    /// Trials per candidate in the section search.
    #[arg(long, default_value_t = 500)]
    pub search_trials: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DecodeSimArgs {
    /// Plan written by `construct`.
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Decode with the plan's section maps instead of fresh random ones.
    #[arg(long)]
    pub fixed_sections: bool,
    /// Skip the exact per-branch error computation.
    #[arg(long)]
    pub no_exact_profile: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step error profile CSV (default: next to the report).
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// `all` or a comma-separated list of check ids.
    #[arg(long, default_value = "all")]
    pub checks: String,
    /// Instances per (group, k) pair.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cyclic group orders to draw channels over.
    #[arg(long, value_delimiter = ',', default_values_t = vec![2u32, 3, 4])]
    pub q: Vec<u32>,
    /// Output dimensions.
    #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 3])]
    pub k: Vec<usize>,
    /// JSONL output (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Random,
    NearUseless,
    NearHomomorphism,
    Hybrid,
    Pure,
    Classical,
}

#[derive(Debug, Args, Serialize)]
pub struct MacRegionArgs {
    /// One user group per occurrence, as comma-separated cyclic orders.
    #[arg(long = "user", required = true)]
    pub users: Vec<String>,
    /// Channel file over the product of the user groups.
    #[arg(long, conflicts_with_all = ["k", "family"])]
    pub channel: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Polarized estimates for depths 1..=n.
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV output (default: next to the JSON).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot configure threads: {e}")))?;
    }
    match cli.command {
        Command::Channel(ChannelCommand::Validate { file, out }) => commands::channel_validate(&file, out.as_deref()),
        Command::Channel(ChannelCommand::Preset { preset, out }) => commands::channel_preset(&preset, &out),
        Command::Polarize(a) => commands::polarize(&a),
        Command::Construct(a) => commands::construct(&a),
        Command::DecodeSim(a) => commands::decode_sim(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::MacRegion(a) => commands::mac_region(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
