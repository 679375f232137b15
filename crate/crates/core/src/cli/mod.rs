//! Command-line front end: `run`, `scan` and `reproduce`.
//!
//! Exit codes are 0 on success, 2 for configuration or usage errors and 3
//! when the analysis fails.

pub mod commands;
pub mod config;
pub mod output;
pub mod presets;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ANALYSIS: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn analysis(message: impl Into<String>) -> Self {
        CliError { code: EXIT_ANALYSIS, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Degenerate(_) => CliError::analysis(e.to_string()),
            Error::Config { line: 0, message } => CliError::usage(format!("config error: {message}")),
            _ => CliError::usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ddsim",
    version,
    about = "Collisional dephasing and continuous dynamical decoupling of trapped atoms"
)]
pub struct Cli {
    /// Worker threads for the ensemble simulation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configured experiment and fit its signal.
    Run { config: PathBuf },
    /// Repeat a run over a list of parameter values and fit tau_c linearly.
    Scan { config: PathBuf },
    /// Regenerate the data behind one of the published figures.
    Reproduce {
        /// One of fig2a, fig2b, fig2c, fig2d, fig3, fig4, fig5.
        figure: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        atoms: usize,
        /// Output prefix (default: the figure id).
        #[arg(long)]
        out: Option<String>,
    },
}

fn with_path(path: &std::path::Path, e: Error) -> CliError {
    match e {
        Error::Config { line, message } if line > 0 => CliError::usage(format!("{}:{line}: {message}", path.display())),
        Error::Config { message, .. } => CliError::usage(format!("{}: {message}", path.display())),
        other => other.into(),
    }
}

fn dispatch(cli: Cli) -> Result<Vec<String>, CliError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = config::load_run_config(&config).map_err(|e| with_path(&config, e))?;
            commands::cmd_run(&cfg)
        }
        Command::Scan { config } => {
            let scan = config::load_scan_config(&config).map_err(|e| with_path(&config, e))?;
            commands::cmd_scan(&scan)
        }
        Command::Reproduce { figure, seed, atoms, out } => {
            if atoms == 0 {
                return Err(CliError::usage("--atoms must be >= 1"));
            }
            let opts = presets::ReproduceOptions { seed, atoms, prefix: out };
            Ok(presets::reproduce(&figure, &opts)?.report)
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return EXIT_USAGE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure the thread pool: {e}");
            return EXIT_USAGE;
        }
    }
    match dispatch(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
