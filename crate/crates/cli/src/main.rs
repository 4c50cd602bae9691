//! `coolsweep` — cooling plant co-design sweep CLI.
//!
//! Subcommands: gen-data, enumerate, solve, evaluate, sweep, report.
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 internal failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "coolsweep",
    version,
    about = "Cooling plant co-design optimizer: partition enumeration, per-timestep setpoint optimization, and annual design sweeps"
)]
struct Cli {
    /// JSON run configuration; flags override config values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic telemetry dataset in the canonical CSV schema.
    GenData(GenDataArgs),
    /// Enumerate integer partitions of the CDU pool into subloops.
    Enumerate(EnumerateArgs),
    /// Solve a single timestep and print the operating point.
    Solve(SolveArgs),
    /// Evaluate one partition over a dataset and print annual metrics.
    Evaluate(EvaluateArgs),
    /// Evaluate the partition design space over a dataset.
    Sweep(SweepArgs),
    /// Emit plot-ready CSV series from a completed sweep.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Number of timesteps.
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Number of CDUs.
    #[arg(long, default_value_t = 25)]
    cdus: usize,
    /// Hottest-to-coldest mean load spread in [0, 1).
    #[arg(long, default_value_t = 0.24)]
    spread: f64,
    /// RNG seed; identical seeds give identical files.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output CSV path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EnumerateArgs {
    /// Total CDU count.
    #[arg(long, default_value_t = 25)]
    n: usize,
    /// Subloop count or inclusive range, e.g. `3` or `2..6`.
    #[arg(long, default_value = "2..6")]
    k: String,
    /// Print only the partition count per K.
    #[arg(long)]
    count_only: bool,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Operational strategy: A, B, or C.
    #[arg(long)]
    strategy: String,
    /// Per-subloop heat loads in kW, comma separated, e.g. `4000,3000`.
    #[arg(long)]
    loads: String,
    /// Pinned flow fractions, comma separated; defaults to a uniform split.
    #[arg(long)]
    fractions: Option<String>,
    /// Derive proportional fractions from a partition, e.g. `(19,6)`.
    #[arg(long, conflicts_with = "fractions")]
    partition: Option<String>,
    /// Measured baseline supply temperature, °C.
    #[arg(long, default_value_t = 30.0)]
    baseline_t_sup: f64,
    /// Also run the independent oracle and print both results.
    #[arg(long)]
    oracle: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Dataset CSV path.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Partition, e.g. `(19,6)`.
    #[arg(long)]
    partition: String,
    /// Operational strategy: A, B, or C.
    #[arg(long, default_value = "C")]
    strategy: String,
    /// CDU-to-subloop assignment policy: balanced or worst_case.
    #[arg(long, default_value = "balanced")]
    assignment: String,
    /// Fraction mode: proportional or optimized.
    #[arg(long, default_value = "optimized")]
    fraction_mode: String,
    /// Workload equalization level in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Cross-check each timestep against the oracle.
    #[arg(long)]
    oracle_guard: bool,
    /// Write a per-timestep debug CSV (t, strategy, setpoints, power, status).
    #[arg(long, value_name = "FILE")]
    dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Dataset CSV path.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Output directory for sweep_long.csv, summary.json, cells.partial.csv.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Subloop count range, e.g. `2..6`.
    #[arg(long)]
    k: Option<String>,
    /// Explicit partitions, e.g. `(19,6),(14,6,5)`; overrides --k.
    #[arg(long)]
    partitions: Option<String>,
    /// Strategies to evaluate, e.g. `A,B,C`.
    #[arg(long)]
    strategies: Option<String>,
    /// Assignment policies, e.g. `balanced,worst_case`.
    #[arg(long)]
    assignments: Option<String>,
    /// Fraction modes, e.g. `proportional,optimized`.
    #[arg(long)]
    fraction_modes: Option<String>,
    /// Equalization levels, e.g. `0,0.25,0.5`.
    #[arg(long)]
    alpha_grid: Option<String>,
    /// Worker threads (default: config, then $COOLSWEEP_WORKERS, then auto).
    #[arg(long)]
    workers: Option<usize>,
    /// Re-evaluate only cells missing from cells.partial.csv.
    #[arg(long)]
    resume: bool,
    /// Cross-check every solve against the oracle and keep the better point.
    #[arg(long)]
    oracle_guard: bool,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory holding a completed sweep (reads cells.partial.csv).
    #[arg(long, value_name = "DIR")]
    sweep: PathBuf,
    /// Output directory for the report CSVs; defaults to the sweep directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Rows in the top-partition ranking.
    #[arg(long, default_value_t = 20)]
    top: usize,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or semantic misuse (exit 2).
    Usage(String),
    /// Unreadable/invalid data or infeasible request on data (exit 3).
    Data(String),
    /// Unexpected internal failure (exit 4).
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(message) => {
                eprintln!("error: {message}");
                return ExitCode::from(3);
            }
        },
        None => RunConfig::default(),
    };

    let outcome = match cli.command {
        Command::GenData(args) => commands::gen_data(&args, &config),
        Command::Enumerate(args) => commands::enumerate(&args),
        Command::Solve(args) => commands::solve(&args, &config),
        Command::Evaluate(args) => commands::evaluate(&args, &config),
        Command::Sweep(args) => commands::sweep(&args, &config),
        Command::Report(args) => commands::report(&args),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
