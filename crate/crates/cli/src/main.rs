//! `lensmimo`: power profiles, field dumps, Gaussian fits and sum-rate
//! simulations for a massive MIMO array behind a dielectric lens.
//!
//! Exit status is 0 on success, 2 for configuration errors, 3 for numerical
//! failures and 4 for file errors.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lensmimo::{Error, ErrorCategory, Result};

use commands::RunManifest;

#[derive(Debug, Parser)]
#[command(
    name = "lensmimo",
    version,
    about = "Lens-embedded massive MIMO simulator"
)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for results.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Directory for cached profiles, fits and codebooks [default: <out-dir>/cache].
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Worker threads [default: available parallelism].
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fail instead of propagating when the profile cache is missing or stale.
    #[arg(long, global = true)]
    no_build: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep the configured angles and cache the power profiles.
    LensProfile,
    /// Dump the intensity history behind the lens and report the focal peak.
    BpmField,
    /// Run the Monte Carlo sum-rate simulations.
    Simulate,
    /// Fit the one-Gaussian model to the cached profiles.
    FitGaussian,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let config_path = cli
        .config
        .ok_or_else(|| Error::Config("no scenario given; pass --config <file>".into()))?;
    let mut cfg = config::parse_config(&config_path)?;
    if let Some(seed) = cli.seed {
        cfg.simulation.seed = seed;
    }
    let run = RunManifest {
        cache_dir: cli.cache_dir.unwrap_or_else(|| cli.out_dir.join("cache")),
        out_dir: cli.out_dir,
        config_path,
        seed: cli.seed,
        no_build: cli.no_build,
    };
    commands::echo_config(&run, &cfg)?;
    match cli.command {
        Command::LensProfile => commands::cmd_lens_profile(&run, &cfg),
        Command::BpmField => commands::cmd_bpm_field(&run, &cfg),
        Command::Simulate => commands::cmd_simulate(&run, &cfg),
        Command::FitGaussian => commands::cmd_fit_gaussian(&run, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Numerical => 3,
                ErrorCategory::Io => 4,
            })
        }
    }
}
