#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;
mod verify;

use commands::{Report, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Arbitrage checks, tree pricing and life-contingent valuation.
///
/// Exit codes: 0 success (or a discount factor exists), 1 bad input or a
/// failed verification suite, 2 arbitrage found, 3 valuation methods disagree.
/// Set CONTINGENT_PRICER_LOG (e.g. `debug`) for diagnostics on stderr.
#[derive(Debug, Parser)]
#[command(name = "contingent-pricer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Input file
    #[arg(long, short)]
    input: PathBuf,
    /// Output file, replaced atomically; stdout when omitted
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide between an arbitrage portfolio and a discount factor for a
    /// CSV payoff matrix `asset,s1,...,sn,cost`
    CheckMarket {
        #[command(flatten)]
        io: Common,
        /// LP feasibility tolerance
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Price a JSON tree of node records by backward induction
    PriceTree {
        #[command(flatten)]
        io: Common,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Value a contract from a JSON config by quadrature and by ODE
    Value {
        #[command(flatten)]
        io: Common,
        /// Overrides the config's grid step
        #[arg(long)]
        grid_step: Option<f64>,
        /// Allowed deviation between methods, relative to max(1, max |price|)
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Where to write the JSON summary with --format csv; stderr when omitted
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Net level premium rate for a whole-life config
    Premium {
        #[command(flatten)]
        io: Common,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run the built-in invariant suites
    Verify {
        /// JSON results; stdout when omitted
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
        /// Relative tolerance for the ODE/quadrature agreement suite
        #[arg(long)]
        tolerance: Option<f64>,
        /// Grid step for the ODE/quadrature agreement suite
        #[arg(long)]
        grid_step: Option<f64>,
        /// Put this dividend on the zero-dividend martingale fixture
        #[arg(long)]
        inject_dividend: Option<f64>,
    },
}

fn positive(name: &str, value: Option<f64>) -> Result<()> {
    match value {
        Some(v) if !(v > 0.0 && v.is_finite()) => bail!("--{name} must be positive, got {v}"),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<Status> {
    let (report, output) = match cli.command {
        Command::CheckMarket { io, tolerance } => {
            positive("tolerance", tolerance)?;
            (commands::check_market(&io.input, tolerance)?, io.output)
        }
        Command::PriceTree { io, format } => (commands::price_tree(&io.input, format)?, io.output),
        Command::Value {
            io,
            grid_step,
            tolerance,
            format,
            summary,
        } => {
            positive("grid-step", grid_step)?;
            positive("tolerance", tolerance)?;
            let report = commands::value(&io.input, grid_step, tolerance, format)?;
            if let Some(s) = &report.summary {
                match &summary {
                    Some(path) => output::emit(Some(path), s)?,
                    None => eprint!("{}", String::from_utf8_lossy(s)),
                }
            }
            (report, io.output)
        }
        Command::Premium { io, format } => (commands::premium(&io.input, format)?, io.output),
        Command::Verify {
            output,
            seed,
            tolerance,
            grid_step,
            inject_dividend,
        } => {
            positive("tolerance", tolerance)?;
            positive("grid-step", grid_step)?;
            let defaults = verify::Options::default();
            let options = verify::Options {
                seed,
                agreement_tolerance: tolerance.unwrap_or(defaults.agreement_tolerance),
                grid_step: grid_step.unwrap_or(defaults.grid_step),
                inject_dividend,
            };
            let results = verify::run(&options);
            for s in &results.suites {
                eprintln!(
                    "[{}] {}: worst {:.3e} (tolerance {:.1e}, {} cases) {}",
                    if s.passed { "PASS" } else { "FAIL" },
                    s.name,
                    s.worst,
                    s.tolerance,
                    s.cases,
                    s.detail
                );
            }
            let status = if results.passed { Status::Ok } else { Status::Failed };
            let report = Report {
                status,
                body: output::json(&results)?,
                summary: None,
            };
            (report, output)
        }
    };
    output::emit(output.as_deref(), &report.body)?;
    Ok(report.status)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CONTINGENT_PRICER_LOG", "warn")).init();
    // clap exits with 2 on usage errors, which would read as "arbitrage".
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Failed.code() } else { 0 });
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Failed.code())
        }
    }
}
