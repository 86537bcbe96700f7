//! Batch front end for the long-memory SMC filter.
//!
//! `longmem-smc <simulate|estimate-d|filter|forecast|diagnose> --config FILE
//!  [--seed INT] [--N INT] [--delta FLOAT] [--threads INT] [--out DIR]`
//!
//! Exit codes: 0 success, 1 domain/config error, 2 I/O error.

mod commands;
mod config;
mod error;
mod ingest;
mod output;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use error::{CliError, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "longmem-smc", version, about = "SMC filtering for long-memory stochastic volatility models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file (key = value lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of particles (overrides the config file)
    #[arg(long = "N", global = true)]
    n_particles: Option<usize>,

    /// Discount factor for parameter learning (overrides the config file)
    #[arg(long, global = true)]
    delta: Option<f64>,

    /// Worker threads; 0 uses all cores. Results are independent of this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory (overrides the config file)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a latent path and observations into sim.csv
    Simulate,
    /// Estimate the memory parameter by log-periodogram regression
    #[command(name = "estimate-d")]
    EstimateD,
    /// Run the particle filter; writes filter.csv and params.csv
    Filter,
    /// Rolling one-step forecasts with bootstrap intervals
    Forecast,
    /// Filter, standardized residuals and their ACF
    Diagnose,
}

fn run(cli: Cli) -> Result<()> {
    let Some(config_path) = &cli.config else {
        return Err(CliError::Config("--config FILE is required".into()));
    };
    let overrides = Overrides {
        seed: cli.seed,
        n_particles: cli.n_particles,
        delta: cli.delta,
        threads: cli.threads,
        out: cli.out.clone(),
    };
    let cfg = RunConfig::load(config_path, &overrides)?;

    let dispatch = |cfg: &RunConfig| match cli.command {
        Command::Simulate => commands::cmd_simulate(cfg),
        Command::EstimateD => commands::cmd_estimate_d(cfg),
        Command::Filter => commands::cmd_filter(cfg),
        Command::Forecast => commands::cmd_forecast(cfg),
        Command::Diagnose => commands::cmd_diagnose(cfg),
    };

    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
        pool.install(|| dispatch(&cfg))
    } else {
        dispatch(&cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
