//! `parspike`: run neuron simulations, equivalence suites, benchmarks,
//! training and the numerical checks from the command line.
//!
//! Exit status is 0 when every check of the invoked command passes, 1 when
//! a check fails and 2 on errors (bad config, unreadable data, ...).

mod commands;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parspike::config::RunConfig;
use parspike::io::ReportFormat;

#[derive(Parser)]
#[command(
    name = "parspike",
    version,
    about = "Spiking sequence models with parallel training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Base seed; overrides `seed` from the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write records here (CSV, or JSON for a `.json` path).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Force the report format instead of guessing from `--out`.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Directory holding MNIST IDX files (optionally gzipped).
    #[arg(
        long,
        global = true,
        env = "PARSPIKE_DATA_DIR",
        default_value = "data/mnist"
    )]
    pub data_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one neuron layer sequentially and in parallel and compare.
    Simulate,
    /// Randomized equivalence suites and the LIF/ALIF and PRF/LIF identities.
    Equiv,
    /// Time sequential against parallel training steps.
    Bench,
    /// Train a classifier, optionally after a gradient check.
    Train {
        /// Save the trained parameters here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// PRF frequency response, simulated and closed form.
    Freq,
    /// Monte-Carlo variance of the PRF membrane under white-noise input.
    Variance,
    /// Energy estimates for the ListOps configuration.
    Energy,
    /// Firing rates of a model on task data.
    Stats {
        /// Load parameters from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

pub struct Ctx {
    pub config: RunConfig,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
    pub data_dir: PathBuf,
}

fn context(common: Common) -> anyhow::Result<Ctx> {
    let config = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?,
        None => RunConfig::default(),
    };
    let format = match (&common.format, &common.out) {
        (Some(f), _) => f.parse()?,
        (None, Some(p)) => ReportFormat::from_path(p),
        (None, None) => ReportFormat::Csv,
    };
    Ok(Ctx {
        seed: common.seed.unwrap_or(config.seed),
        config,
        out: common.out,
        format,
        data_dir: common.data_dir,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> anyhow::Result<bool> {
        let ctx = context(cli.common)?;
        match cli.command {
            Command::Simulate => commands::simulate(&ctx),
            Command::Equiv => commands::equiv(&ctx),
            Command::Bench => commands::bench(&ctx),
            Command::Train { checkpoint } => commands::train(&ctx, checkpoint.as_deref()),
            Command::Freq => commands::freq(&ctx),
            Command::Variance => commands::variance(&ctx),
            Command::Energy => commands::energy(&ctx),
            Command::Stats { checkpoint } => commands::stats(&ctx, checkpoint.as_deref()),
        }
    };
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
