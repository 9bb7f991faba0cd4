use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "mecplan", version, about = "Radio and compute planning for delay-bounded short packets at the edge")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Draw a random deployment and save it as a scenario file.
    Generate(GenerateArgs),
    /// Simulate MEC queues and check the processor-sharing delay model.
    ValidateQueueing(ValidateArgs),
    /// Solve association, offloading and subcarrier allocation.
    Optimize(OptimizeArgs),
    /// Solve over a range of one parameter.
    Sweep(SweepArgs),
    /// Repeat a run from its manifest.
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::ValidateQueueing(_) => "validate-queueing",
            Command::Optimize(_) => "optimize",
            Command::Sweep(_) => "sweep",
            Command::Rerun(_) => "rerun",
        }
    }

    pub fn out(&self) -> &Option<PathBuf> {
        match self {
            Command::Generate(a) => &a.out,
            Command::ValidateQueueing(a) => &a.out,
            Command::Optimize(a) => &a.out,
            Command::Sweep(a) => &a.out,
            Command::Rerun(a) => &a.out,
        }
    }

    pub fn set_out(&mut self, out: Option<PathBuf>) {
        match self {
            Command::Generate(a) => a.out = out,
            Command::ValidateQueueing(a) => a.out = out,
            Command::Optimize(a) => a.out = out,
            Command::Sweep(a) => a.out = out,
            Command::Rerun(a) => a.out = out,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of devices K.
    #[arg(long, default_value_t = 20)]
    pub devices: usize,
    #[arg(long, default_value_t = 2)]
    pub ap_rows: usize,
    #[arg(long, default_value_t = 2)]
    pub ap_cols: usize,
    /// AP spacing (m).
    #[arg(long, default_value_t = 500.0)]
    pub ap_spacing: f64,
    /// Antennas per AP.
    #[arg(long, default_value_t = 16)]
    pub nt: u32,
    /// MEC capacity in short packets per slot (S / c_S).
    #[arg(long, default_value_t = 6.0)]
    pub s_over_c: f64,
    /// Subcarrier spacing (Hz); the slot shrinks to keep symbols per slot.
    #[arg(long)]
    pub w0: Option<f64>,
    #[arg(long, default_value_t = 8.0)]
    pub shadowing_std: f64,
    /// Mark the scenario as having negligible short-packet load.
    #[arg(long)]
    pub typical: bool,
    /// Output directory (default: $MECPLAN_OUT_DIR or ./mecplan-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetArg {
    /// 10 short and 10 long sources at 0.01 packets/slot, S / c_S = 5.
    Fig5,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalArg {
    Poisson,
    Bernoulli,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateArgs {
    /// Built-in configuration.
    #[arg(long, value_enum, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub preset: Option<PresetArg>,
    /// Scenario file; the queue at `--ap` is fed by the devices whose
    /// strongest AP it is.
    #[arg(long, requires = "ap")]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub ap: Option<usize>,
    /// Measured packets per discipline.
    #[arg(long, default_value_t = 10_000_000)]
    pub packets: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ArrivalArg::Poisson)]
    pub arrivals: ArrivalArg,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Plb,
    Extended,
    Comm,
    Comp,
    Brute,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BisectionArg {
    Linear,
    Log,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemArg {
    Exact,
    RelaxCeil,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Extended)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    pub eps_init: f64,
    /// Bracket width at which linear bisection stops.
    #[arg(long, default_value_t = 1e-9)]
    pub delta_eps: f64,
    #[arg(long, value_enum, default_value_t = BisectionArg::Linear)]
    pub bisection: BisectionArg,
    /// Log-ratio bracket width at which log bisection stops.
    #[arg(long, default_value_t = 1e-3)]
    pub log_tol: f64,
    #[arg(long, value_enum, default_value_t = SubproblemArg::Exact)]
    pub subproblem: SubproblemArg,
    /// Treat the scenario as having negligible short-packet load.
    #[arg(long)]
    pub typical: bool,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaryArg {
    /// Antennas per AP.
    Nt,
    /// MEC capacity S / c_S.
    Srate,
    /// Subcarrier spacing in Hz, slot length rescaled to keep t_s w0.
    W0ts,
    /// Number of devices (the first K of the scenario).
    K,
}

impl VaryArg {
    pub fn as_str(self) -> &'static str {
        match self {
            VaryArg::Nt => "nt",
            VaryArg::Srate => "srate",
            VaryArg::W0ts => "w0ts",
            VaryArg::K => "k",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Plb,
    Extended,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Base scenario; a default deployment from `--seed` when absent.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub vary: VaryArg,
    /// Comma-separated values and `start:stop:step` ranges.
    #[arg(long)]
    pub values: String,
    #[arg(long, value_enum, default_value_t = SweepMode::Extended)]
    pub mode: SweepMode,
    #[arg(long, default_value_t = 1.0)]
    pub eps_init: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub delta_eps: f64,
    #[arg(long, value_enum, default_value_t = BisectionArg::Log)]
    pub bisection: BisectionArg,
    #[arg(long, default_value_t = 1e-3)]
    pub log_tol: f64,
    /// Sweep points solved concurrently (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
