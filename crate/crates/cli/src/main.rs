mod commands;
mod config;
mod data_source;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::KvConfig;
use crate::error::CliError;

/// Boundary-proximity index for small classifiers: Monte Carlo entropy
/// scans, radius sweeps, adversarial and watermark experiments.
#[derive(Debug, Parser)]
#[command(name = "zonescan", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Master seed for sampling, shuffling, initialization and attacks [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory that receives all output files [default: .]
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Flat `key = value` file supplying defaults for any long option
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an MLP with mini-batch SGD
    Train(commands::TrainArgs),
    /// Index value of one input
    Scan(commands::ScanArgs),
    /// Index value across a range of radii
    Sweep(commands::SweepArgs),
    /// Clean vs FGM-adversarial index distributions
    Adv(commands::AdvArgs),
    /// Index distributions of inputs on which models disagree
    Disagree(commands::DisagreeArgs),
    /// Embed a watermark key and compare index distributions over it
    Watermark(commands::WatermarkArgs),
    /// Fraction of the input space assigned to each class
    Surface(commands::SurfaceArgs),
    /// Two-sample Kolmogorov–Smirnov test on two value files
    Ks(commands::KsArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.global.config {
        Some(path) => KvConfig::load(path)?,
        None => KvConfig::default(),
    };
    if let Some(workers) = cfg.get(cli.global.workers, "workers")? {
        if workers == 0 {
            return Err(CliError::Validation("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot start worker pool: {e}")))?;
    }
    let ctx = commands::Context {
        seed: cfg.or(cli.global.seed, "seed", 0)?,
        out_dir: cfg.or(cli.global.out_dir, "out-dir", PathBuf::from("."))?,
        cfg,
    };
    let written = match cli.command {
        Command::Train(a) => commands::train(&ctx, a),
        Command::Scan(a) => commands::scan(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Adv(a) => commands::adv(&ctx, a),
        Command::Disagree(a) => commands::disagree(&ctx, a),
        Command::Watermark(a) => commands::watermark(&ctx, a),
        Command::Surface(a) => commands::surface(&ctx, a),
        Command::Ks(a) => commands::ks(&ctx, a),
    }?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zonescan: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
