//! `msc`: many-short-chains estimation experiments from a config file.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Baseline, Context};
use crate::config::Config;
use crate::error::CliError;

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "MSC_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "msc", version, about = "Many-short-chains Monte Carlo estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Required (N, M) over a dimension sweep of the AR(1) model.
    Plan(RunArgs),
    /// MSC estimate of the AR(1) invariant mean.
    RunAr(RunArgs),
    /// MSC estimate of logistic-regression posterior means.
    RunLogit(RunArgs),
    /// Single-chain Pólya-Gamma Gibbs comparator.
    BaselineGibbs(RunArgs),
    /// Single-chain random-walk Metropolis comparator.
    BaselineRwm(RunArgs),
    /// Check Pólya-Gamma sample means against their closed form.
    PgSelftest(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML configuration file.
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker count (takes precedence over MSC_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn workers_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .map(Some)
            .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn context(args: &RunArgs) -> Result<Context, CliError> {
    let mut config = Config::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    config.validate()?;
    let workers = match (args.workers, workers_from_env()?, config.workers) {
        (Some(w), _, _) | (None, Some(w), _) | (None, None, Some(w)) => w,
        (None, None, None) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    if workers == 0 {
        return Err(CliError::Config("workers must be at least 1".into()));
    }
    Ok(Context { config, workers })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, command): (&RunArgs, fn(&Context) -> Result<(), CliError>) = match &cli.command {
        Command::Plan(a) => (a, commands::plan),
        Command::RunAr(a) => (a, commands::run_ar),
        Command::RunLogit(a) => (a, commands::run_logit),
        Command::BaselineGibbs(a) => (a, |c| commands::baseline(c, Baseline::Gibbs)),
        Command::BaselineRwm(a) => (a, |c| commands::baseline(c, Baseline::Rwm)),
        Command::PgSelftest(a) => (a, commands::pg_selftest),
    };
    let ctx = context(args)?;
    command(&ctx)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
