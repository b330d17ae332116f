//! `acrnn`: feature extraction, training, evaluation, cross-validation,
//! ablations and gradient checks from the command line.
//!
//! Exit status is 0 on success, 1 for invalid input (arguments,
//! configuration, malformed files) and 2 for failures while running.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn exit_code(validation: bool) -> ExitCode {
    ExitCode::from(if validation { 1 } else { 2 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit_code(true) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(cli.log_level()))
        .format_timestamp(None)
        .init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.is_validation())
        }
    }
}
