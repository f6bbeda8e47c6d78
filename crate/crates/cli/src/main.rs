use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::Failure;
use config::{Overrides, StudyConfig};

/// Relaxation finite difference solver for u_t = u_xx + g(u) u + f.
#[derive(Parser)]
#[command(name = "relaxfd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run; writes (n, t, j, x, u) rows and a JSON summary
    Solve {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Refinement study against the exact solution
    Study {
        #[command(flatten)]
        overrides: Overrides,
        /// Levels run concurrently
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Runs the built-in invariant battery
    Verify {
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { overrides } => commands::solve(&StudyConfig::resolve(&overrides)?),
        Command::Study { overrides, jobs } => commands::study(&StudyConfig::resolve(&overrides)?, jobs),
        Command::Verify { seed } => commands::verify(seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
