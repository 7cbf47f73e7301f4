//! `lambda-lab`: command-line runner for translated-sum experiments.

mod commands;
mod config;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lambda_lab::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_CAP: u8 = 3;
pub const EXIT_REFINEMENT: u8 = 4;
pub const EXIT_CLAIM: u8 = 5;
const EXIT_OTHER: u8 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> CliError {
        CliError { code: EXIT_CONFIG, msg: msg.into() }
    }

    pub fn io(msg: impl Into<String>) -> CliError {
        CliError { code: EXIT_OTHER, msg: msg.into() }
    }

    pub fn with_code(mut self, code: u8) -> CliError {
        self.code = code;
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        let code = match &e {
            Error::WindowTooLarge { .. } => EXIT_CAP,
            Error::RefinementTooLarge { .. } => EXIT_REFINEMENT,
            Error::ClaimViolated { .. } => EXIT_CLAIM,
            Error::Parse(_)
            | Error::EmptyInterval { .. }
            | Error::InvalidSet(_)
            | Error::InvalidWitness(_)
            | Error::InvalidWeights(_)
            | Error::InvalidArgument(_)
            | Error::NestedThinning
            | Error::FastDecayViolated(_)
            | Error::InsufficientLambda { .. } => EXIT_CONFIG,
            _ => EXIT_OTHER,
        };
        CliError { code, msg: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "lambda-lab", version, about = "Exact experiments on translated-sum series")]
struct Cli {
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// JSON file with the command's parameters; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate or count a set over a window.
    Set(commands::SetCmd),
    /// Randomly thin a set and list the survivors.
    Thin(commands::ThinCmd),
    /// Thinning probabilities: exact formula against Monte Carlo.
    Ak(commands::AkCmd),
    /// Weighted construction under the fast-decay condition, with claim checks.
    Ctype(commands::CtypeCmd),
    /// Randomize a characteristic witness and run a seed ensemble.
    Randomize(commands::RandomizeCmd),
    /// Translate counts of a finite dyadic union.
    Density(commands::DensityCmd),
    /// Partial-sum trajectories of a witness over a grid.
    Eval(commands::EvalCmd),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::config("--threads must be >= 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::io(e.to_string()))?;
    let cfg = cli.config.as_deref();
    match cli.cmd {
        Command::Set(c) => commands::set(c, cfg),
        Command::Thin(c) => commands::thin(c, cfg),
        Command::Ak(c) => commands::ak(c, cfg),
        Command::Ctype(c) => commands::ctype(c, cfg),
        Command::Randomize(c) => commands::randomize(c, cfg),
        Command::Density(c) => commands::density(c, cfg),
        Command::Eval(c) => commands::eval(c, cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lambda-lab: {e}");
            ExitCode::from(e.code)
        }
    }
}
