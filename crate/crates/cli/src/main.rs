use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use grom::{Error, ErrorClass};

mod config;
mod pipeline;

use config::RunConfig;
use pipeline::Context;

/// Parametric reduced-order modelling on the Grassmann manifold.
#[derive(Debug, Parser)]
#[command(name = "grom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Run directory, overriding `output_dir` of the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Regenerate snapshot sets that already exist.
    #[arg(long, global = true)]
    force: bool,

    /// Worker threads for per-parameter work (default: all cores).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,

    /// Override one configuration field, e.g. `bicitsgm.calib_power_spatial=2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the oracle at every training parameter.
    Generate,
    /// Build the global mean and POD triplets; print eigenvalues and RIC.
    Train,
    /// Predict every query parameter with Bi-CITSGM.
    Interp,
    /// Run the ITSGM + POD-Galerkin baseline (burgers oracle only).
    Galerkin,
    /// Run both methods and write the combined error/timing report.
    Evaluate,
    /// Write the eigenvalue spectra of the training database.
    Spectrum,
}

fn run(cli: Cli) -> grom::Result<()> {
    let config = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    let ctx = Context::new(config, cli.out, cli.force, cli.jobs.map(|j| j as usize))?;
    match cli.command {
        Command::Generate => pipeline::generate(&ctx),
        Command::Train => pipeline::train(&ctx),
        Command::Interp => pipeline::interp(&ctx),
        Command::Galerkin => pipeline::galerkin(&ctx),
        Command::Evaluate => pipeline::evaluate(&ctx),
        Command::Spectrum => pipeline::spectrum(&ctx),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Io => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
