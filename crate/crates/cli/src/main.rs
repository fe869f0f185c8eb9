//! Command-line driver for the spin-glass flow pipeline.
//!
//! One subcommand per stage: generate a disorder realization, sample it
//! with parallel tempering, convert spins to continuous rows, train a flow,
//! analyze the results. Stages talk through files only, every run is
//! deterministic given its flags and seeds, and each output directory
//! carries the resolved configuration plus hashes of every input read.
//!
//! Exit codes: 0 success, 2 usage error, 3 numeric failure, 4 I/O failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use glassflow::config::ExperimentConfig;
use glassflow::errors::Result;
use glassflow::{commands, exec};

#[derive(Debug, Parser)]
#[command(name = "glassflow", version, about = "Spin-glass sampling, flow training, and diagnostics")]
struct Cli {
    /// Worker threads for sampling and training; 0 or omitted means all
    /// cores. Results are identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON experiment file supplying defaults for omitted flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a coupling realization and store it.
    GenDisorder(commands::gen_disorder::GenDisorderArgs),
    /// Sample the realization with parallel tempering.
    SamplePt(commands::sample_pt::SamplePtArgs),
    /// Decorate recorded spins with continuous rows.
    Convert(commands::convert::ConvertArgs),
    /// Fit a flow by forward or reverse KL.
    Train(commands::train::TrainArgs),
    /// Diagnostics over samples and trained flows.
    Analyze(commands::analyze::AnalyzeArgs),
}

fn run(cli: &Cli) -> Result<()> {
    let config = ExperimentConfig::load_optional(cli.config.as_ref())?;
    match &cli.command {
        Command::GenDisorder(args) => commands::gen_disorder::run(args, &config),
        Command::SamplePt(args) => {
            let pool = exec::thread_pool(cli.threads)?;
            commands::sample_pt::run(args, &config, &pool)
        }
        Command::Convert(args) => commands::convert::run(args, &config),
        Command::Train(args) => {
            let pool = exec::thread_pool(cli.threads)?;
            commands::train::run(args, &config, &pool)
        }
        Command::Analyze(args) => commands::analyze::run(args, &config),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
