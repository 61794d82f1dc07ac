//! Command-line front end for the neutral stochastic delay equation toolkit.
//!
//! Three subcommands: `validate` runs structural checks on a configuration,
//! `run` executes the configured task and writes reproducible artifacts, and
//! `plotdata` reshapes those artifacts into plot-friendly `.dat` files.

mod artifacts;
mod config;
mod tasks;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(
    name = "nsfde",
    version,
    about = "Simulate and certify stochastic delay equations of neutral type"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the JSON experiment configuration.
    config: PathBuf,
    /// Override the base random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Override the uniform grid step.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Directory for artifacts (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration structurally without simulating.
    Validate(ConfigArgs),
    /// Execute the configured task and write its artifacts.
    Run(ConfigArgs),
    /// Reshape run artifacts in a directory into gnuplot-friendly files.
    Plotdata {
        /// Directory holding the artifacts of a previous run.
        dir: PathBuf,
        /// Where to write the .dat files (defaults to the same directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    match Cli::parse().command {
        Command::Validate(args) => with_config(&args, |cfg, _out| tasks::validate(cfg)),
        Command::Run(args) => with_config(&args, |cfg, out| tasks::run(cfg, &out)),
        Command::Plotdata { dir, out } => {
            let target = out.unwrap_or_else(|| dir.clone());
            report(tasks::plotdata(&dir, &target))
        }
    }
}

fn with_config(
    args: &ConfigArgs,
    f: impl FnOnce(&ExperimentConfig, PathBuf) -> anyhow::Result<i32>,
) -> i32 {
    let overrides = Overrides {
        seed: args.seed,
        paths: args.paths,
        grid_step: args.grid_step,
    };
    let config = match ExperimentConfig::load(&args.config, overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("validation error: {e:#}");
            return tasks::EXIT_VALIDATION;
        }
    };
    let out = tasks::output_dir(&config, args.out.as_deref());
    report(f(&config, out))
}

fn report(result: anyhow::Result<i32>) -> i32 {
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
