//! Batch experiment runner for differentially private iterative
//! screening: synthetic data generation, trial orchestration, results
//! persistence, and plot-data emission.

mod analyze;
mod records;
mod run;
mod synth;
mod theorem2;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "dp-screen",
    about = "Differentially private iterative screening experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic regression dataset with a planted sparse
    /// weight vector.
    Synth(synth::SynthArgs),
    /// Run repeated trials of a training pipeline on a dataset.
    Run(Box<run::RunArgs>),
    /// Compute metrics, sign tests, and plot data from results files.
    Analyze(analyze::AnalyzeArgs),
    /// Tabulate the uniform-selection screening model: closed form
    /// versus Monte Carlo, with the two limit checks.
    Theorem2(theorem2::Theorem2Args),
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => synth::run(args),
        Command::Run(args) => run::run(*args),
        Command::Analyze(args) => analyze::run(args),
        Command::Theorem2(args) => theorem2::run(args),
    }
}
