//! `boostkit` command-line tool.
//!
//! Exit codes: 0 success, 2 argument errors, 3 data errors, 4 numeric failures.

// Negated comparisons such as `!(x > 0.0)` deliberately also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod tsv;

use std::process::ExitCode;

use boostkit::{BoostError, ErrorKind};
use clap::Parser;

use args::{Cli, Command};

/// Failure of a command, classified for the exit code.
#[derive(Debug)]
pub enum CliError {
    Argument(String),
    Boost(BoostError),
}

impl From<BoostError> for CliError {
    fn from(e: BoostError) -> Self {
        CliError::Boost(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Argument(m) => f.write_str(m),
            CliError::Boost(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Argument(_) => 2,
            CliError::Boost(e) => match e.kind() {
                ErrorKind::Argument => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn run(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Argument("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Argument(format!("cannot configure thread pool: {e}")))?;
    }
    match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Cv(a) => commands::cv(&a),
        Command::Effects(a) => commands::effects(&a),
        Command::Simulate(a) => commands::simulate(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
