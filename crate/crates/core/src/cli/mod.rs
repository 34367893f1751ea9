//! The `eventum` command line.
//!
//! Exit codes: 0 when every check passes, 1 when a residual exceeds its
//! tolerance, 2 for unusable input (bad arguments, config, or parameters).

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{execute, CommandKind, CommandOutput};
pub use config::{ConfigError, ConfigFile, Format, Overrides, RunConfig, Tolerances};

/// Environment variable overriding the string-space dimension cap.
pub const DIM_CAP_ENV: &str = "EVENTUM_DIM_CAP";

#[derive(Debug, Parser)]
#[command(
    name = "eventum",
    version,
    about = "Simulate measurement as unitary string dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Completeness, dilation unitarity and extraction residuals.
    Validate(RunArgs),
    /// Joint outcome distribution of the string model.
    Simulate(RunArgs),
    /// Prior distribution and posteriors from the filtering recursion.
    Filter(RunArgs),
    /// Both pictures side by side, with the causality checks.
    Compare(RunArgs),
    /// Monte-Carlo trajectories against exact probabilities.
    Sample(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON config file.
    #[arg(value_name = "CONFIG", conflicts_with = "config")]
    pub config_file: Option<PathBuf>,
    /// JSON config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Scenario name: cat, weak-qubit, pointer-Zn, sequential-observable, explicit.
    #[arg(long, value_name = "NAME")]
    pub scenario: Option<String>,
    /// Number of measurement steps t.
    #[arg(long, value_name = "INT")]
    pub steps: Option<usize>,
    /// Truncation horizon T of the string.
    #[arg(long, value_name = "INT")]
    pub horizon: Option<usize>,
    /// Number of Monte-Carlo trajectories.
    #[arg(long, value_name = "INT")]
    pub samples: Option<usize>,
    /// Seed of the trajectory sampler.
    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,
    /// Replace every residual tolerance.
    #[arg(long, value_name = "FLOAT")]
    pub tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Command {
    fn split(self) -> (CommandKind, RunArgs) {
        match self {
            Command::Validate(a) => (CommandKind::Validate, a),
            Command::Simulate(a) => (CommandKind::Simulate, a),
            Command::Filter(a) => (CommandKind::Filter, a),
            Command::Compare(a) => (CommandKind::Compare, a),
            Command::Sample(a) => (CommandKind::Sample, a),
        }
    }
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            scenario: self.scenario.clone(),
            steps: self.steps,
            horizon: self.horizon,
            samples: self.samples,
            seed: self.seed,
            tol: self.tol,
            out: self.out.as_ref().map(|p| p.display().to_string()),
            format: self.format,
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (kind, args) = cli.command.split();
    let config = match load_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cap = match dim_cap() {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    match execute(kind, &config, cap) {
        Ok(out) => {
            if let Err(e) = out.write(&config) {
                eprintln!("error: cannot write output: {e}");
                return 2;
            }
            for f in &out.failures {
                eprintln!("FAIL {f}");
            }
            if out.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig, ConfigError> {
    let file = match args.config_file.as_ref().or(args.config.as_ref()) {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    RunConfig::resolve(file, &args.overrides())
}

fn dim_cap() -> Result<usize, String> {
    match std::env::var(DIM_CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("{DIM_CAP_ENV}={v:?} is not a positive integer")),
        Err(_) => Ok(crate::string::DEFAULT_DIM_CAP),
    }
}
