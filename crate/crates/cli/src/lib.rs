//! Command-line driver for the `cpspan` library.
//!
//! Subcommands generate synthetic datasets, run (rate × seed) matrices,
//! the loss-mode ablation, the alpha/beta sensitivity grid and the
//! imputation-rank sweep, and dump embeddings for plotting. Exit codes are
//! 0 on success, 1 for configuration errors and 2 for runtime failures.

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;

pub mod args;
mod commands;
pub mod output;

pub use args::{Cli, Command, OUTPUT_ROOT_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cpspan::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

/// Executes an already parsed command line.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Run(a) => commands::run(&a),
        Command::Ablate(a) => commands::ablate(&a),
        Command::Sensitivity(a) => commands::sensitivity(&a),
        Command::RankSweep(a) => commands::rank_sweep(&a),
        Command::DumpEmbeddings(a) => commands::dump_embeddings(&a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
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
