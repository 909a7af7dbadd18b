//! Batch pricing front end for defaultable discrete-coupon bonds.
//!
//! Reads a JSON valuation config, solves the default barriers, prices the
//! bond and equity under the configured rate model, and reports durations,
//! tax-adjusted prices and an optional Monte Carlo cross-check as a summary
//! table and machine-readable CSV.

use clap::{Args, Parser, Subcommand};
use std::process::ExitCode;

mod config;
mod engine;
mod report;

use config::RunConfig;
use engine::{compute, Overrides, Selection};

#[derive(Debug)]
pub enum CliError {
    /// Malformed or missing configuration (exit 2).
    Config(String),
    /// Numerical failure such as a bracketing problem (exit 3).
    Numerical(String),
    /// Unsupported payoff regime (exit 4).
    Unsupported(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Unsupported(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Unsupported(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cbond",
    version,
    about = "Defaultable discrete-coupon bond pricer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Valuation configuration (JSON).
    #[arg(long)]
    config: String,
    /// Write the report as CSV to this path.
    #[arg(long)]
    csv: Option<String>,
    /// Append a Monte Carlo cross-check to the report.
    #[arg(long)]
    mc_check: bool,
    /// Monte Carlo seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo path-count override.
    #[arg(long)]
    paths: Option<usize>,
    /// Coupon tax rate override.
    #[arg(long)]
    tax: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Barriers, prices, breakdown and tax-adjusted price.
    Price(CommonArgs),
    /// Expected-default barriers only.
    Barriers(CommonArgs),
    /// Interest-rate durations.
    Duration(CommonArgs),
    /// Prices plus the Monte Carlo cross-check.
    McCheck(CommonArgs),
    /// Every applicable quantity group (per the config's `outputs` list).
    Run(CommonArgs),
}

fn selection(cmd: &Command, cfg: &RunConfig, args: &CommonArgs) -> Selection {
    let mut sel = match cmd {
        Command::Price(_) => Selection {
            barriers: true,
            price: true,
            tax: true,
            ..Default::default()
        },
        Command::Barriers(_) => Selection {
            barriers: true,
            ..Default::default()
        },
        Command::Duration(_) => Selection {
            barriers: true,
            duration: true,
            ..Default::default()
        },
        Command::McCheck(_) => Selection {
            barriers: true,
            price: true,
            mc: true,
            ..Default::default()
        },
        Command::Run(_) => Selection {
            barriers: cfg.wants("barriers"),
            price: cfg.wants("price"),
            duration: cfg.wants("duration"),
            tax: cfg.wants("tax"),
            mc: cfg
                .outputs
                .as_ref()
                .is_some_and(|o| o.iter().any(|g| g == "mc")),
        },
    };
    if args.mc_check {
        sel.mc = true;
    }
    sel
}

fn run(cli: Cli) -> Result<(), CliError> {
    let args = match &cli.command {
        Command::Price(a)
        | Command::Barriers(a)
        | Command::Duration(a)
        | Command::McCheck(a)
        | Command::Run(a) => a,
    };
    let cfg = RunConfig::load(&args.config)?;
    let sel = selection(&cli.command, &cfg, args);
    let over = Overrides {
        seed: args.seed,
        paths: args.paths,
        tax: args.tax,
    };
    let report = compute(&cfg, sel, &over)?;
    print!("{}", report.render_table());
    if let Some(path) = &args.csv {
        std::fs::write(path, report.render_csv())
            .map_err(|e| CliError::Config(format!("cannot write csv {path}: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
