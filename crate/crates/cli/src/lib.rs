//! Command-line front end: reads a TOML config, runs one solver and writes
//! `values.csv`, `policy.csv`, `bands.csv` and `summary.json` into the output
//! directory.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 a solver
//! invariant failed.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dividend", version, about = "Optimal dividend payout under risk-sensitive utilities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads for the solvers (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exponential utility by backward induction on the risk-parameter orbit.
    SolveExp(Common),
    /// Power utility on accumulated-dividend grids.
    SolvePower(Common),
    /// Logarithmic utility on accumulated-dividend grids.
    SolveLog(Common),
    /// Expected discounted dividends (risk-neutral).
    SolveNeutral(Common),
    /// Policy iteration for exponential utility, started from paying everything.
    Howard {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = dividend_core::howard::DEFAULT_MAX_ITERATIONS)]
        max_iterations: usize,
    },
    /// Compare the solver against exhaustive enumeration on a tiny instance.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Initial surplus to check (default: every surplus up to x_max).
        #[arg(long)]
        x0: Option<i64>,
    },
    /// Monte Carlo evaluation of the optimal rule.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        x0: i64,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = dividend_core::simulate::DEFAULT_MAX_STEPS)]
        max_steps: usize,
    },
    /// Band structure of the optimal exponential (or risk-neutral) rule.
    Bands(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SolveExp(c)
            | Command::SolvePower(c)
            | Command::SolveLog(c)
            | Command::SolveNeutral(c)
            | Command::Bands(c)
            | Command::Howard { common: c, .. }
            | Command::OracleCheck { common: c, .. }
            | Command::Simulate { common: c, .. } => c,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let threads = cli.command.common().threads;
    let result = match threads {
        None => commands::dispatch(&cli.command),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| commands::dispatch(&cli.command)),
            Err(e) => Err(commands::Failure::Invalid(format!("cannot start {n} threads: {e}"))),
        },
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("dividend: {f}");
            f.exit_code()
        }
    }
}
