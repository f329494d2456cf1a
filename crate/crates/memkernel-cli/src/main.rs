//! Command-line front end for the memory-kernel evolution engine.
//!
//! Exit codes: 0 success, 2 configuration error, 3 invariant failure,
//! 4 numerical flag (non-convergence or inconclusive check).

mod runner;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

#[derive(Debug)]
pub enum CliError {
    /// Bad input: malformed JSON, invalid parameters, non-CPTP channel.
    Config(String),
    /// A verified invariant failed beyond tolerance.
    Invariant(String),
    /// A numerical guard fired: truncation, tail bound, inconclusive check.
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Invariant(m) | CliError::Numerical(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "memkernel",
    about = "CPTP evolutions from memory-kernel master equations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the evolution with every configured method and write
    /// CSV time series plus a JSON diagnostics file.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the Monte Carlo seed from the scenario file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check physical invariants and cross-method agreement; prints one
    /// PASS/FAIL line per check.
    Verify {
        /// Scenario JSON file.
        scenario: Option<PathBuf>,
        /// Verify every bundled preset instead of a single file.
        #[arg(long, conflicts_with = "scenario")]
        all: bool,
    },
    /// Compare the quadrature Laplace transform of the propagator with
    /// the closed-form resolvent at given points.
    LaplaceCheck {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Laplace point "re,im" (repeatable); Re u must be positive.
        #[arg(long = "u", required = true)]
        u: Vec<String>,
        /// Residual tolerance.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
}

fn parse_u(raw: &str) -> Result<Complex64, CliError> {
    let parts: Vec<&str> = raw.split(',').collect();
    let bad = || CliError::Config(format!("cannot parse Laplace point '{raw}' as re,im"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(re.trim().parse().map_err(|_| bad())?, 0.0)),
        [re, im] => Ok(Complex64::new(
            re.trim().parse().map_err(|_| bad())?,
            im.trim().parse().map_err(|_| bad())?,
        )),
        _ => Err(bad()),
    }
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("MEMKERNEL_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, out, seed } => runner::cmd_run(&scenario, &out, seed),
        Command::Verify { scenario, all } => {
            if all {
                runner::cmd_verify_all()
            } else {
                let path = scenario.ok_or_else(|| {
                    CliError::Config("pass a scenario file or --all".into())
                })?;
                runner::cmd_verify(&path)
            }
        }
        Command::LaplaceCheck { scenario, u, tol } => {
            let points: Vec<Complex64> =
                u.iter().map(|s| parse_u(s)).collect::<Result<_, _>>()?;
            runner::cmd_laplace_check(&scenario, &points, tol)
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
