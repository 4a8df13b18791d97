//! `pilotwave` command-line tool.

mod args;
mod commands;
mod outdir;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure of one invocation, with its exit code and error class.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// Every run of an ensemble failed.
    Simulation(String),
    Lib(pilotwave::Error),
}

impl From<pilotwave::Error> for CliError {
    fn from(e: pilotwave::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn class(&self) -> (&'static str, u8) {
        use pilotwave::Error::*;
        match self {
            CliError::Usage(_) => ("usage", 2),
            CliError::Simulation(_) => ("simulation", 6),
            CliError::Lib(e) => match e {
                Parameter(_) => ("usage", 2),
                InvalidConfig(_) | ConfigParse(_) => ("invalid-config", 3),
                Io { .. } => ("io", 4),
                FormatVersion { .. } | Checksum(_) | DigestMismatch { .. } | Corrupt(_) => ("format", 5),
                Divergence { .. } | LightConeBreach { .. } | Causality { .. } => ("simulation", 6),
                Calibration(_) => ("calibration", 7),
                _ => ("analysis", 1),
            },
        }
    }

    fn message(&self) -> String {
        let text = match self {
            CliError::Usage(m) | CliError::Simulation(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        };
        text.lines().collect::<Vec<_>>().join("; ")
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !matches!(cli.command, Command::Ensemble(_)) {
        // Only `ensemble` runs a worker pool; the rest stay on one thread.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    }
    let result = match &cli.command {
        Command::Calibrate => commands::calibrate(&cli),
        Command::Run(a) => commands::run(&cli, a),
        Command::Ensemble(a) => commands::ensemble(&cli, a),
        Command::Analytic(a) => commands::analytic(&cli, a),
        Command::Compare(a) => commands::compare(&cli, a),
        Command::Export(a) => commands::export(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (class, code) = e.class();
            eprintln!("error: {class}: {}", e.message());
            ExitCode::from(code)
        }
    }
}
