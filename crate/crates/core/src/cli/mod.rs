//! Command-line front end: `chi2mech design|sweep|adversary|provider <scenario.json>`.
//!
//! Exit codes: 0 success, 1 bad input, 2 infeasible epsilon, 3 numerical failure.

pub mod commands;
pub mod format;
pub mod scenario;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use crate::error::Error;
use crate::Budget;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable holding the log filter, e.g. `CHI2MECH_LOG=debug`.
pub const LOG_ENV: &str = "CHI2MECH_LOG";

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: String) -> Self {
        Self { code: EXIT_INPUT, message }
    }

    pub fn numerical(message: String) -> Self {
        Self { code: EXIT_NUMERICAL, message }
    }

    /// Prefixes the message with the scenario field it concerns.
    pub fn context(self, field: &str) -> Self {
        Self { message: format!("{field}: {}", self.message), ..self }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::EpsilonOutOfRange { .. } => EXIT_INFEASIBLE,
            Error::SingularMatrix { .. } | Error::NonFinite(_) | Error::InvariantViolation(_) => {
                EXIT_NUMERICAL
            }
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BudgetArg {
    Eps2,
    HalfEps2,
}

impl From<BudgetArg> for Budget {
    fn from(b: BudgetArg) -> Self {
        match b {
            BudgetArg::Eps2 => Budget::Eps2,
            BudgetArg::HalfEps2 => Budget::HalfEps2,
        }
    }
}

/// Command-line settings that take precedence over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub format: Format,
    pub oracle_resolution: Option<usize>,
    pub budget: Option<Budget>,
    pub seed: Option<u64>,
}

#[derive(Parser, Debug)]
#[command(name = "chi2mech", version, about = "Design strongly chi-square-private disclosure mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design the mechanism for a base scenario and report it.
    Design(Common),
    /// Tabulate utilities over an epsilon (and optionally BSC alpha) grid.
    Sweep(Common),
    /// Design against a known binary adversary channel.
    Adversary(Common),
    /// Design for a provider who only observes X.
    Provider(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario JSON file.
    scenario: PathBuf,
    /// Write the output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (sweep defaults to csv, everything else to json).
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Grid resolution for the brute-force oracle in sweeps.
    #[arg(long, value_parser = clap::value_parser!(u64).range(crate::oracle::MIN_RESOLUTION as u64..))]
    oracle_resolution: Option<u64>,
    /// Per-letter budget convention.
    #[arg(long, value_enum)]
    budget: Option<BudgetArg>,
    /// Seed for the randomized oracle.
    #[arg(long)]
    seed: Option<u64>,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            error!("exit {}: {}", e.code, e.message);
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (common, is_sweep) = match &cli.command {
        Command::Sweep(c) => (c, true),
        Command::Design(c) | Command::Adversary(c) | Command::Provider(c) => (c, false),
    };
    let overrides = Overrides {
        format: common.format.unwrap_or(if is_sweep { Format::Csv } else { Format::Json }),
        oracle_resolution: common.oracle_resolution.map(|r| r as usize),
        budget: common.budget.map(Budget::from),
        seed: common.seed,
    };
    let file = scenario::load(&common.scenario)?;
    let output = match &cli.command {
        Command::Design(_) => commands::design(&file, &overrides)?,
        Command::Sweep(_) => commands::sweep(&file, &overrides)?,
        Command::Adversary(_) => commands::adversary(&file, &overrides)?,
        Command::Provider(_) => commands::provider(&file, &overrides)?,
    };
    match &common.out {
        Some(path) => std::fs::write(path, output)
            .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(output.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::validation(format!("cannot write output: {e}")))
        }
    }
}
