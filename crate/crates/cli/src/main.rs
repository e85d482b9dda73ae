//! `crowdsearch` command-line front end.
//!
//! Exit status: 0 on success, 2 for invalid input, 3 when a solver fails to
//! converge, 1 when a reproduction misses its reference value or on I/O errors.

mod commands;
mod output;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::{emit, render_csv, run_record, Format};
use crate::tables::TableName;

#[derive(Debug, Parser)]
#[command(name = "crowdsearch", version, about = "Equilibrium, prize design and simulation for crowdsearch contests")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    opts: Opts,
}

/// Flags shared by every subcommand; each subcommand reads the ones it needs.
#[derive(Debug, Clone, Args)]
pub struct Opts {
    /// Cost distribution as JSON, e.g. '{"kind":"uniform","a":0,"b":1}'
    #[arg(long, global = true)]
    pub dist: Option<String>,
    /// Probability that a searcher finds the object
    #[arg(long, global = true)]
    pub q: Option<f64>,
    /// Prize (total prize budget for prize structures)
    #[arg(long = "V", global = true)]
    pub prize: Option<f64>,
    /// Number of agents
    #[arg(long, global = true)]
    pub n: Option<f64>,
    /// Principal's valuation of the object
    #[arg(long = "W", global = true)]
    pub w: Option<f64>,
    /// Expert's probability of finding the object
    #[arg(long, global = true)]
    pub qe: Option<f64>,
    /// Per-agent abilities as a JSON array
    #[arg(long, global = true)]
    pub qvec: Option<String>,
    /// Prize structure as a JSON array, highest rank first
    #[arg(long = "v", global = true)]
    pub v: Option<String>,
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol: f64,
    /// Monte Carlo replications
    #[arg(long, global = true, default_value_t = 100_000)]
    pub reps: u64,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    N,
    #[value(name = "V")]
    Prize,
    Q,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Symmetric equilibrium threshold and success probability
    Solve,
    /// Equilibria over a list of values of n, V or q
    Sweep {
        #[arg(long, value_enum)]
        over: SweepParam,
        /// JSON array of parameter values
        #[arg(long)]
        values: String,
    },
    /// Reproduce a published table or example and check it
    Tables {
        #[arg(long, value_enum)]
        name: TableName,
    },
    /// Optimal prize for valuation W
    Principal {
        /// Grid size for the brute-force cross-check
        #[arg(long, default_value_t = 10_000)]
        grid: usize,
    },
    /// Optimal split of a prize budget across ranks
    PrizeStructure,
    /// Equilibrium with a costless expert searcher
    Expert {
        #[arg(long, default_value = "shared")]
        mode: String,
    },
    /// Agents with heterogeneous abilities
    Hetero {
        /// Scan two-agent best responses on a grid of this many cells instead
        #[arg(long)]
        scan: Option<usize>,
    },
    /// Large-crowd limits and convergence rates
    Asymptotics {
        /// cf_product, f_alone or c_gap
        #[arg(long, default_value = "c_gap")]
        quantity: String,
        /// JSON array of crowd sizes for the rate fit (default 1e2..1e6)
        #[arg(long)]
        values: Option<String>,
    },
    /// Monte Carlo simulation of the contest
    Simulate {
        /// Threshold played by every agent (default: the equilibrium)
        #[arg(long)]
        threshold: Option<f64>,
        /// Also estimate agent 0's gain from searching at this cost
        #[arg(long)]
        deviation_at: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep { .. } => "sweep",
            Command::Tables { .. } => "tables",
            Command::Principal { .. } => "principal",
            Command::PrizeStructure => "prize-structure",
            Command::Expert { .. } => "expert",
            Command::Hetero { .. } => "hetero",
            Command::Asymptotics { .. } => "asymptotics",
            Command::Simulate { .. } => "simulate",
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<output::Report> {
    let o = &cli.opts;
    match &cli.command {
        Command::Solve => commands::solve(o),
        Command::Sweep { over, values } => commands::sweep(o, *over, values),
        Command::Tables { name } => commands::tables(*name),
        Command::Principal { grid } => commands::principal(o, *grid),
        Command::PrizeStructure => commands::prize_structure(o),
        Command::Expert { mode } => commands::expert(o, mode),
        Command::Hetero { scan } => commands::hetero(o, *scan),
        Command::Asymptotics { quantity, values } => commands::asymptotics(o, quantity, values.as_deref()),
        Command::Simulate { threshold, deviation_at } => commands::simulate(o, *threshold, *deviation_at),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let started = Instant::now();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(commands::exit_code(&err));
        }
    };
    let text = match cli.opts.format {
        Format::Csv => render_csv(&report.table),
        Format::Json => {
            let record = run_record(cli.command.name(), &argv[1..], &report, started.elapsed().as_secs_f64());
            let mut s = serde_json::to_string_pretty(&record).expect("JSON values always serialize");
            s.push('\n');
            s
        }
    };
    if let Err(err) = emit(&text, cli.opts.out.as_deref()) {
        eprintln!("error: {err:#}");
        return ExitCode::from(1);
    }
    if !report.failed_checks.is_empty() {
        for f in &report.failed_checks {
            eprintln!("mismatch: {f}");
        }
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
