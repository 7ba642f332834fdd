//! The `gvqp` command line: feature extraction, training, prediction,
//! evaluation and diagnostic dumps on top of `gvqp-core`.

pub mod args;
mod commands;
pub mod config;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;

/// Exit status for invalid command lines and configurations.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for failures while doing the work.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Rejected before any work starts.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] gvqp_core::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit status. Diagnostics go to stderr.
pub fn run(argv: Vec<OsString>) -> i32 {
    let argv = match config::inject_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command inside a pool of `--threads` workers.
pub fn execute(cli: Cli) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Failed(format!("cannot start thread pool: {e}")))?;
    pool.install(|| commands::dispatch(cli.command))
}
