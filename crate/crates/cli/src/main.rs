mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or inputs; exit code 2.
    Usage(String),
    /// The computation itself failed; exit code 1.
    Runtime(String),
}

impl From<samdiag_core::Error> for CliError {
    fn from(e: samdiag_core::Error) -> Self {
        use samdiag_core::Error as E;
        match e {
            E::Io { .. } | E::BlowUp { .. } | E::NotSeparable | E::Consistency(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn run(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => commands::simulate(a),
        Command::Heatmap(a) => commands::heatmap_cmd(a),
        Command::Thresholds(a) => commands::thresholds_cmd(a),
        Command::Lb(a) => commands::lb(a),
        Command::Regime(a) => commands::regime(a),
        Command::Maxmargin(a) => commands::maxmargin(a),
        Command::Selftest => commands::selftest(),
    }
}

fn fail(e: CliError) -> ExitCode {
    match e {
        CliError::Usage(m) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        CliError::Runtime(m) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
