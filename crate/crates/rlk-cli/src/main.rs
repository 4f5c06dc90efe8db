//! `rlk` — run the exponential multistep integrators from the command line.
//!
//! Subcommands map one-to-one onto the benchmark artifacts: `solve` writes a
//! trajectory, `stability` writes stability-domain grids and real-axis
//! crossings, `converge` writes an error-vs-step table, `critical-dt` writes
//! bracketed critical time steps. All outputs are CSV with a config-digest
//! comment line; identical config means byte-identical output regardless of
//! worker count.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solve terminated by
//! overflow, 4 i/o error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Outcome;
use config::{load_config, ConvergeConfig, CriticalDtConfig, SolveConfig, StabilityConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration (exit 2): parse failures, unknown keys, invalid values.
    Config(String),
    /// Filesystem problems (exit 4).
    Io(String),
    /// Everything else (exit 1).
    Run(String),
}

impl From<rlk::Error> for CliError {
    fn from(e: rlk::Error) -> Self {
        match e {
            rlk::Error::Io { .. } => CliError::Io(e.to_string()),
            rlk::Error::ModelSchema { .. } | rlk::Error::InvalidArgument(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Run(other.to_string()),
        }
    }
}

/// Exponential multistep integrators for stiff split ODEs: trajectories,
/// Dahlquist stability scans, convergence studies, critical time steps.
#[derive(Parser)]
#[command(name = "rlk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path overrides, e.g. --set h=0.05 --set scheme.order=3
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for CSV files
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one problem with one scheme and write the trajectory
    Solve(RunArgs),
    /// Scan Dahlquist stability domains and report real-axis crossings
    Stability(RunArgs),
    /// Error-vs-step study against an RK4 reference
    Converge(RunArgs),
    /// Bracket the largest step that still completes without overflow
    #[command(name = "critical-dt")]
    CriticalDt(RunArgs),
}

fn run() -> Result<Outcome, CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve(args) => {
            let (cfg, digest) = load_config::<SolveConfig>(&args.config, &args.set)?;
            commands::cmd_solve(&cfg, &digest, &args.out)
        }
        Command::Stability(args) => {
            let (cfg, digest) = load_config::<StabilityConfig>(&args.config, &args.set)?;
            commands::cmd_stability(&cfg, &digest, &args.out)
        }
        Command::Converge(args) => {
            let (cfg, digest) = load_config::<ConvergeConfig>(&args.config, &args.set)?;
            commands::cmd_converge(&cfg, &digest, &args.out)
        }
        Command::CriticalDt(args) => {
            let (cfg, digest) = load_config::<CriticalDtConfig>(&args.config, &args.set)?;
            commands::cmd_critical_dt(&cfg, &digest, &args.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::OverflowTerminated) => ExitCode::from(3),
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(4)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
