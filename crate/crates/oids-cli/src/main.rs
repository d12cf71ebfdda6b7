//! `oids`: run contextual-bandit experiments, replicate the catalog
//! examples, export plot data and check regret bounds.
//!
//! Exit codes: 0 success, 2 validation error, 3 runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Example};

#[derive(Parser)]
#[command(name = "oids", version, about = "Optimistic information-directed sampling experiments")]
struct Cli {
    /// Replace the base seed wherever one is used; everything else is
    /// untouched.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads for the repetition loop (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Replicate a canonical example (revealing | sparse | revelatory) and
    /// print a pass/fail table.
    Replicate {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate the trace CSVs in a directory into plot.csv.
    ExportPlot { dir: PathBuf },
    /// Evaluate closed-form regret bounds against a summary.json.
    CheckBounds {
        dir: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        lstar: Option<f64>,
        #[arg(long)]
        v: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, jobs } => commands::cmd_run(&config, cli.seed_override, jobs),
        Command::Replicate { name, out } => match name.parse::<Example>() {
            Ok(example) => commands::cmd_replicate(example, out.as_deref(), cli.seed_override),
            Err(message) => Err(CliError::Validation(message)),
        },
        Command::ExportPlot { dir } => commands::cmd_export_plot(&dir),
        Command::CheckBounds { dir, k, n, lstar, v } => {
            commands::cmd_check_bounds(&dir, k, n, lstar, v)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
