//! `phasenoise` command-line front end.
//!
//! Every output starts with a reproducibility header: `#` comment lines in
//! CSV, a `header` object in JSON. Exit codes: 0 success, 2 usage error,
//! 1 runtime failure.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use args::{Cli, Command};

/// Argument combination that parses but cannot be honoured.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct Usage(pub String);

fn is_usage(err: &anyhow::Error) -> bool {
    if err.downcast_ref::<Usage>().is_some() {
        return true;
    }
    matches!(
        err.downcast_ref::<phasenoise::Error>(),
        Some(phasenoise::Error::InvalidParameter(_) | phasenoise::Error::Validity(_))
    )
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Psd(a) => commands::psd(a),
        Command::Autocorr(a) => commands::autocorr(a),
        Command::Gen(a) => commands::gen(a),
        Command::Validate(a) => commands::validate(a),
        Command::Errors(a) => commands::errors(a),
        Command::Sir(a) => commands::sir(a),
        Command::Ber(a) => commands::ber(a),
        Command::Fit(a) => commands::fit(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}
