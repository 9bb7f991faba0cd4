//! `mecplan` command-line tool.
//!
//! Every command writes its outputs plus a `manifest.json` into one
//! directory. Exit codes: 0 answered (infeasible included), 1 validation
//! failure, 2 usage or input error, 3 internal or numerical error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod generate;
mod manifest;
mod optimize;
mod queueing;
mod sweep;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;

pub use args::{
    ArrivalArg, BisectionArg, Cli, Command, GenerateArgs, ModeArg, OptimizeArgs, PresetArg, RerunArgs, SubproblemArg,
    SweepArgs, SweepMode, ValidateArgs, VaryArg,
};
pub use manifest::RunManifest;
pub use sweep::{parse_values, SweepRow};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MECPLAN_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "mecplan-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<mecplan::scenario::ScenarioError> for CliError {
    fn from(e: mecplan::scenario::ScenarioError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<mecplan::optimizer::OptError> for CliError {
    fn from(e: mecplan::optimizer::OptError) -> Self {
        use mecplan::optimizer::OptError;
        match e {
            OptError::InvalidScenario(_) | OptError::Precondition(_) | OptError::TooLarge(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

/// What a command produced.
pub struct Outcome {
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub seeds: Vec<u64>,
    /// `false` when a validation command ran but its check failed.
    pub passed: bool,
    pub message: String,
}

pub(crate) fn resolve_out(out: &Option<PathBuf>) -> PathBuf {
    out.clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub(crate) fn absolute(path: &Path) -> Result<PathBuf, CliError> {
    std::fs::canonicalize(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub(crate) fn write_text(dir: &Path, name: &str, text: &str, outputs: &mut Vec<String>) -> Result<(), CliError> {
    std::fs::write(dir.join(name), text)?;
    outputs.push(name.to_string());
    Ok(())
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

/// Input paths are recorded absolute so a manifest works from any directory.
fn with_absolute_inputs(mut command: Command) -> Result<Command, CliError> {
    let path = match &mut command {
        Command::ValidateQueueing(a) => a.scenario.as_mut(),
        Command::Optimize(a) => Some(&mut a.scenario),
        Command::Sweep(a) => a.scenario.as_mut(),
        Command::Generate(_) | Command::Rerun(_) => None,
    };
    if let Some(p) = path {
        *p = absolute(p)?;
    }
    Ok(command)
}

/// Runs one command and writes its manifest.
pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    let started = std::time::Instant::now();
    let (command, out) = match command {
        Command::Rerun(r) => {
            let mut m = RunManifest::load(&r.manifest)?;
            m.command.set_out(r.out.clone());
            let out = resolve_out(&r.out);
            (m.command, out)
        }
        c => (c.clone(), resolve_out(c.out())),
    };
    let command = with_absolute_inputs(command)?;
    std::fs::create_dir_all(&out)?;
    let outcome = match &command {
        Command::Generate(a) => generate::run(a, &out),
        Command::ValidateQueueing(a) => queueing::run(a, &out),
        Command::Optimize(a) => optimize::run(a, &out),
        Command::Sweep(a) => sweep::run(a, &out),
        Command::Rerun(_) => Err(CliError::Usage("a manifest cannot describe another rerun".into())),
    }?;
    let manifest = RunManifest::new(&command, &outcome, started.elapsed().as_secs_f64());
    std::fs::write(out.join(manifest::FILE_NAME), to_json(&manifest))?;
    Ok(outcome)
}

/// Parses arguments, runs, prints diagnostics and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(outcome) => {
            println!("{}", outcome.message);
            if outcome.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
