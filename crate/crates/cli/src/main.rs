//! Command-line front end: runs one experiment per invocation from a TOML
//! config and writes CSV/JSON artifacts to the output directory.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 configuration error,
//! 3 numerical failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::output::OutputDir;

#[derive(Parser)]
#[command(
    name = "bootperc",
    version,
    about = "Bootstrap percolation on inhomogeneous random graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimal fixed point by monotone iteration (and optionally the network).
    Solve(Common),
    /// Monte Carlo simulation on sampled graphs.
    Simulate(Common),
    /// First joint zero of the finite-type system.
    Finite(Common),
    /// Lower/upper step-kernel brackets of the fixed-point integral.
    Sandwich(Common),
    /// Resilience classification of an unseeded configuration.
    Resilience(Common),
    /// Scalar reference solution for constant and rank-one kernels.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for the simulation and the network.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo runs.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, cmd): (
        &Common,
        fn(&LoadedConfig, &OutputDir) -> Result<(), CliError>,
    ) = match &cli.command {
        Command::Solve(c) => (c, commands::solve),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Finite(c) => (c, commands::finite),
        Command::Sandwich(c) => (c, commands::sandwich),
        Command::Resilience(c) => (c, commands::resilience),
        Command::Oracle(c) => (c, commands::oracle),
    };
    let mut cfg = LoadedConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.config.simulation.base_seed = seed;
        cfg.config.solver.seed = seed;
    }
    if let Some(dir) = &common.out {
        cfg.config.output.dir = dir.clone();
    }
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))?;
    }
    let out = OutputDir::create(&cfg.config.output.dir)?;
    out.echo_config(&cfg)?;
    cmd(&cfg, &out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
