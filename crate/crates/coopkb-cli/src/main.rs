//! `coopkb` — experiment driver for the collaborative kernel-bandit library.
//!
//! Verbs:
//! - `run`: execute the configured sweep, writing `results.csv`,
//!   `reports/*.json`, `plots/*.svg`, and `resolved_config.toml`.
//! - `verify`: run the oracle-equivalence suite and print one line per
//!   invariant.
//! - `plot`: regenerate plots from an existing `results.csv` (never
//!   recomputes).
//! - `diag`: print the per-instance diagnostic block as JSON.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid configuration,
//! 3 aborted run (partial artifacts are kept).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod experiment;
mod plots;
mod verify;

#[derive(Parser)]
#[command(name = "coopkb", version, about = "Collaborative pure exploration in kernel bandits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "artifacts")]
    out: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core); overrides the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Print the resolved grid and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Optional configuration; only used to seed the instance family.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Multiplies every tolerance (values above 1 loosen the checks).
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory containing results.csv; plots land in its plots/ subdir.
    #[arg(long, default_value = "artifacts")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Regularizer for the diagnostics; defaults to the fixed-budget value
    /// or an automatically derived one.
    #[arg(long)]
    xi_star: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment sweep.
    Run(RunArgs),
    /// Run the oracle-equivalence verification suite.
    Verify(VerifyArgs),
    /// Regenerate plots from results.csv.
    Plot(PlotArgs),
    /// Print instance diagnostics as JSON.
    Diag(DiagArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => experiment::run(args),
        Command::Verify(args) => verify::run(args),
        Command::Plot(args) => plots::run(args),
        Command::Diag(args) => experiment::diag(args),
    }
}
