//! `bpswitch`: decide whether switching mobile billing plans pays off.

mod commands;
mod inputs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bpswitch_core::BillingMode;

#[derive(Parser)]
#[command(name = "bpswitch", version, about = "Billing plan comparison from call detail records")]
pub struct Cli {
    /// Billing plan catalog (JSON)
    #[arg(long, global = true, value_name = "FILE")]
    pub catalog: Option<PathBuf>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    /// Write output here instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// How a call's charge is derived from the rate schedule
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Lookup)]
    pub billing_mode: ModeArg,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    /// Rate of the call's final minute
    Lookup,
    /// Sum of the per-minute rates
    Cumulative,
}

impl From<ModeArg> for BillingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Lookup => BillingMode::Lookup,
            ModeArg::Cumulative => BillingMode::Cumulative,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DurationArg {
    /// Moment-fitted exponential
    Exponential,
    /// Per-minute relative frequencies
    Histogram,
}

/// Where call traffic comes from: a printout or a ready profile.
#[derive(Args, Clone)]
pub struct TrafficArgs {
    /// Call detail printout (semicolon-separated CSV)
    #[arg(long, value_name = "FILE", conflicts_with = "profile")]
    pub cdr: Option<PathBuf>,

    /// Traffic profile (JSON) with call forces per plan subgroup
    #[arg(long, value_name = "FILE")]
    pub profile: Option<PathBuf>,

    /// Number prefix to destination class table
    #[arg(long, value_name = "FILE")]
    pub prefixes: Option<PathBuf>,

    /// Extra non-working days, one ISO date per line
    #[arg(long, value_name = "FILE")]
    pub holidays: Option<PathBuf>,

    /// Observation period in months (default: the printout's date span)
    #[arg(long)]
    pub months: Option<f64>,

    /// Treat malformed printout rows as errors instead of skipping them
    #[arg(long)]
    pub strict: bool,

    /// Duration model estimated from the printout
    #[arg(long, value_enum, default_value_t = DurationArg::Exponential)]
    pub duration: DurationArg,
}

#[derive(Args, Clone)]
pub struct GridArgs {
    #[arg(long, default_value_t = 0.5)]
    pub k_from: f64,
    #[arg(long, default_value_t = 10.0)]
    pub k_to: f64,
    #[arg(long, default_value_t = 0.5)]
    pub k_step: f64,
}

#[derive(Subcommand)]
pub enum Command {
    /// Check the catalog and, if given, the printout
    Validate {
        #[arg(long, value_name = "FILE")]
        cdr: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Estimate call forces and duration statistics from a printout
    Analyze {
        #[command(flatten)]
        traffic: TrafficArgs,
    },
    /// Full monthly cost of every candidate plan and the resulting ranking
    Rank {
        #[command(flatten)]
        traffic: TrafficArgs,
    },
    /// Optimal plan as total traffic is scaled by k
    Sweep {
        #[command(flatten)]
        traffic: TrafficArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Regression fits of the cost curves over the k sweep
    Fit {
        #[command(flatten)]
        traffic: TrafficArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Monte Carlo monthly bills under Poisson arrivals and exponential durations
    Simulate {
        #[command(flatten)]
        traffic: TrafficArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        runs: u32,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // help and version go to stdout and succeed; usage errors are validation failures
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(commands::EXIT_VALIDATION);
        }
    };
    let result = std::panic::catch_unwind(|| commands::dispatch(&cli));
    match result {
        Ok(Ok(status)) => status,
        Ok(Err(err)) => {
            eprintln!("error: {}", commands::describe(&err));
            ExitCode::from(commands::exit_code(&err))
        }
        Err(_) => ExitCode::from(commands::EXIT_INTERNAL),
    }
}
