//! Pipeline orchestration: one JSON experiment config drives generate →
//! train → transfer → eval → sweep, each writing its artifacts under the
//! config's output directory plus an append-only run manifest.

mod commands;
mod config;
mod manifest;

pub use commands::{
    cmd_eval, cmd_generate, cmd_gradcheck, cmd_sweep, cmd_train, cmd_transfer, GenerateOptions,
};
pub use config::{
    DatasetConfig, ExperimentConfig, RealSourceSection, SourceSection, SplitSpec, SweepSection,
    TransferSection, EXPERIMENT_SCHEMA,
};
pub use manifest::{append_manifest, content_hash, file_hash, ManifestEntry};

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Result;

#[derive(Parser, Debug)]
#[command(name = "flowcast", version, about = "Sim-to-real delay-prediction pipeline")]
pub struct Cli {
    /// Worker-thread cap for parallel stages (env: FLOWCAST_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate scenarios, simulate them and write windowed datasets.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Overwrite existing generated artifacts.
        #[arg(long)]
        force: bool,
        /// Also persist raw packet traces (large).
        #[arg(long)]
        write_traces: bool,
    },
    /// Train the donor model on the simulated dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fine-tune the donor on the realistic dataset.
    Transfer {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's method: manual:FTR | autofreeze | l2sp | gtot.
        #[arg(long)]
        method: Option<String>,
        /// Manual policy code (three letters over F/T/R), e.g. FTR.
        #[arg(long)]
        policy: Option<String>,
    },
    /// Evaluate a checkpoint against a dataset split.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Which dataset tree to evaluate on: simulated | real.
        #[arg(long, default_value = "real")]
        dataset: String,
        /// Which partition split: training | validation | evaluation.
        #[arg(long, default_value = "evaluation")]
        split: String,
        /// Report name (files land under reports/<name>.*).
        #[arg(long)]
        out: Option<String>,
    },
    /// Data-efficiency sweep: scratch vs fine-tuned across subset sizes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset sizes, e.g. 5,10,25.
        #[arg(long)]
        counts: Option<String>,
        /// Comma-separated seeds, e.g. 1,2,3.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Finite-difference check of every model gradient.
    Gradcheck,
}

/// Parses and runs a CLI invocation. The binary maps errors to exit codes.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads.or_else(|| {
        std::env::var("FLOWCAST_THREADS").ok().and_then(|v| v.parse().ok())
    }) {
        // ignore failure: the global pool can only be built once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match cli.command {
        Command::Generate { config, force, write_traces } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_generate(&cfg, &GenerateOptions { force, write_traces })
        }
        Command::Train { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_train(&cfg)
        }
        Command::Transfer { config, method, policy } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_transfer(&cfg, method.as_deref(), policy.as_deref())
        }
        Command::Eval { config, checkpoint, dataset, split, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_eval(&cfg, &checkpoint, &dataset, &split, out.as_deref())
        }
        Command::Sweep { config, counts, seeds } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_sweep(&cfg, counts.as_deref(), seeds.as_deref())
        }
        Command::Gradcheck => cmd_gradcheck(),
    }
}
