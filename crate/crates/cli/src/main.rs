mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{EvaluateArgs, SampleArgs, SplitArgs};
use crate::config::TrainArgs;

/// Link prediction with fuzzy graph attention networks.
///
/// Set FGAT_LOG=error|info|debug for progress output on stderr.
#[derive(Debug, Parser)]
#[command(name = "fgat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and test over one or more seeds; writes metrics, checkpoints and
    /// an aggregate CSV.
    Train(TrainArgs),
    /// Recompute test metrics from a checkpoint and print them as JSON.
    Evaluate(EvaluateArgs),
    /// Score one epoch's negative candidates and print them as CSV.
    Sample(SampleArgs),
    /// Write a seeded train/validation/test split as three edge lists.
    Split(SplitArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FGAT_LOG", "error"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Sample(a) => commands::sample(a),
        Command::Split(a) => commands::split(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
