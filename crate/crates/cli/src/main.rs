mod args;
mod commands;
mod config;
mod failure;
mod io;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use failure::CliResult;

fn run() -> CliResult<()> {
    let argv = config::expand(std::env::args_os().collect())?;
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    match &cli.command {
        Command::Solve(a) => commands::solve::run(a),
        Command::Compare(a) => commands::compare::run(a),
        Command::Materialize(a) => commands::materialize::run(a),
        Command::Horizon(a) => commands::horizon::run(a),
        Command::Bench(a) => commands::bench::run(a),
        Command::Layer(a) => commands::layer::run(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
