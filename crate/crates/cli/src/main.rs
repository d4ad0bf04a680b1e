//! `somno`: synthetic data, preprocessing, augmentation, training and
//! evaluation for PPG sleep staging.
//!
//! Exit codes: 0 success, 2 config error, 3 data or format error, 4 numeric
//! failure. `SOMNO_THREADS` caps the worker pool.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use somno::experiment::Strategy;

use commands::Kind;
use config::{Overrides, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "somno", version, about = "PPG sleep staging pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `section.key = value` settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed this command uses.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic recordings and a manifest.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Filter, resample and normalise recordings to the model rate.
    Preprocess {
        /// Recording file or directory.
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "ppg")]
        kind: Kind,
    },
    /// Add an augmented copy of the PPG channel.
    Augment {
        /// Recording file or directory.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train with early stopping on a manifest's train and val splits.
    Train {
        /// Directory with recordings and a manifest.
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        /// ppg, ppg+aug or ppg+file:NAME.
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score a trained run and write the report as text and JSON.
    Eval {
        /// Output directory of `train`.
        run: PathBuf,
        /// Directory of test recordings.
        data: PathBuf,
        /// Report directory; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SOMNO_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SOMNO_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn load(common: &Common, seed_key: &str, extra: Overrides) -> Result<RunConfig, CliError> {
    let overrides = Overrides { seed: common.seed.map(|s| (seed_key.to_string(), s)), ..extra };
    RunConfig::load(common.config.as_deref(), &overrides)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Synth { common } => {
            let cfg = load(&common, "synth.seed", Overrides::default())?;
            commands::synth(&cfg, &common.out)
        }
        Command::Preprocess { input, out, kind } => commands::preprocess(&input, &out, kind),
        Command::Augment { input, common } => {
            let cfg = load(&common, "augment.seed", Overrides::default())?;
            commands::augment(&cfg, &input, &common.out)
        }
        Command::Train { data, common, strategy, epochs } => {
            let cfg = load(&common, "train.seed", Overrides { strategy, epochs, seed: None })?;
            commands::train(&cfg, &data, &common.out)
        }
        Command::Eval { run, data, out } => {
            let out = out.unwrap_or_else(|| run.clone());
            print!("{}", commands::eval(&run, &data, &out)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
