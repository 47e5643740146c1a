//! Run manifests embedded in every JSON report.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

/// The only field that differs between two runs with identical arguments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub inputs: Vec<InputHash>,
    pub wall_clock: WallClock,
}

/// Collects manifest fields while a subcommand runs.
pub struct ManifestBuilder {
    subcommand: String,
    parameters: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<InputHash>,
    started: SystemTime,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, parameters: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            parameters,
            seed,
            inputs: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    /// Reads an input file, records its hash and returns its text.
    pub fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|_| CliError::validation(format!("{} is not UTF-8 text", path.display())))
    }

    pub fn finish(&self) -> RunManifest {
        RunManifest {
            subcommand: self.subcommand.clone(),
            parameters: self.parameters.clone(),
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs.clone(),
            wall_clock: WallClock {
                started_unix_ms: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0),
                elapsed_ms: self.clock.elapsed().as_millis(),
            },
        }
    }
}
