//! `oba` — batch experiment runner for the agreement simulator.
//!
//! `run` sweeps a parameter grid of seeded simulations, checks safety
//! invariants inline, and writes one record per run; `summarize` turns
//! record files into scaling fits, decide-time quantiles, and pass/fail
//! verdicts; `list-plugins` shows the built-in delay policies and
//! behaviors.  Exit codes: 0 ok, 1 config error, 2 invariant violation.

mod checks;
mod experiment;

use std::process::ExitCode;

use checks::SummarizeArgs;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use experiment::RunArgs;

#[derive(Parser)]
#[command(
    name = "oba",
    version,
    about = "Optimistic Byzantine agreement experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a grid of seeded simulations and write per-run records.
    Run(RunArgs),
    /// Summarize a record file: fits, quantiles, acceptance checks.
    Summarize(SummarizeArgs),
    /// List the built-in delay policies and adversarial behaviors.
    ListPlugins,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.cmd {
        Cmd::Run(args) => experiment::run_command(args),
        Cmd::Summarize(args) => checks::summarize_command(args),
        Cmd::ListPlugins => {
            list_plugins();
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn list_plugins() {
    println!("delay policies:");
    for (name, what) in oba_core::plugins::DELAY_POLICIES {
        println!("  {name:<18} {what}");
    }
    println!("behaviors:");
    for (name, what) in oba_core::plugins::BEHAVIORS {
        println!("  {name:<18} {what}");
    }
}
