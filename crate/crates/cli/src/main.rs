mod cli;
mod commands;
mod settings;
mod table;

use std::process::ExitCode;

use clap::Parser;

use crate::cli::{Cli, Command};
use crate::commands::Failure;
use crate::settings::Settings;

/// Exit status for invalid flags, configuration or output path (clap uses 2 as well).
const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

fn run(cli: Cli) -> Result<Vec<String>, Failure> {
    let settings = Settings::new(cli.common)?;
    let report = match &cli.command {
        Command::Rabi(args) => commands::rabi(&settings, args),
        Command::SweepA(args) => commands::sweep_a(&settings, args),
        Command::ChainProfile(args) => commands::chain_profile(&settings, args),
        Command::Scaling(args) => commands::scaling(&settings, args),
        Command::Attached(args) => commands::attached(&settings, args),
        Command::Oracle => commands::oracle(&settings),
        Command::Steady(args) => commands::steady(&settings, args),
    }?;
    let output = settings.output();
    report
        .table
        .write_path(&output)
        .map_err(|e| Failure::Usage(anyhow::anyhow!("writing {output}: {e}")))?;
    Ok(report.violations)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(violations) if violations.is_empty() => ExitCode::SUCCESS,
        Ok(violations) => {
            for v in &violations {
                eprintln!("validation failed: {v}");
            }
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver error: {e}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}
