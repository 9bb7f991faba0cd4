use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{CliError, Command, Outcome};

pub const FILE_NAME: &str = "manifest.json";

/// Record written next to every output; enough to repeat the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command_name: String,
    /// Every flag after defaults were applied. The output directory is left
    /// out so a rerun can target a fresh one.
    pub command: Command,
    pub seeds: Vec<u64>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &Command, outcome: &Outcome, wall_clock_seconds: f64) -> Self {
        let mut command = command.clone();
        command.set_out(None);
        Self {
            tool: "mecplan".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command_name: command.name().into(),
            command,
            seeds: outcome.seeds.clone(),
            outputs: outcome.outputs.clone(),
            wall_clock_seconds,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: not a run manifest: {e}", path.display())))
    }
}
