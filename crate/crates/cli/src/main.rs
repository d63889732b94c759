//! `bcspec`: batch front end for spectra, kernels, path sums and classical
//! bounces under self-adjoint boundary conditions.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use bcspec_core::bc::BcError;
use bcspec_core::classical::ClassicalError;
use bcspec_core::spectral::SpectralError;
use clap::Parser;

use config::{Cli, Options};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config file: exit code 2.
    Config(String),
    /// A module refused the computation: exit code 3.
    Module { kind: &'static str, msg: String },
    /// Output failure: exit code 1.
    Io(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<BcError> for CliError {
    fn from(e: BcError) -> Self {
        CliError::Module { kind: e.kind(), msg: e.to_string() }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        CliError::Module { kind: e.kind(), msg: e.to_string() }
    }
}

impl From<ClassicalError> for CliError {
    fn from(e: ClassicalError) -> Self {
        CliError::Module { kind: e.kind(), msg: e.to_string() }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("BCSPEC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("BCSPEC_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("BCSPEC_THREADS: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| {
        let opts = Options::merged(&cli.opts)?;
        commands::run(cli.command, &opts)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Module { kind, msg }) => {
            eprintln!("error: {kind}: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Io(e)) => {
            eprintln!("io error: {e:#}");
            ExitCode::from(1)
        }
    }
}
