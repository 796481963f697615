//! `osr3d`: dataset generation, training, evaluation and synthetic-sample
//! export for open-set point-cloud recognition.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "osr3d", version, about = "Open-set recognition for 3D point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat `key = value` config file. Trailing KEY=VALUE arguments override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Dotted-key overrides such as `train.alpha=0.2`.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the toy benchmark described by a manifest (`--config`).
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Closed-set pretraining.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Cache saliency maps of the training objects under a checkpoint.
    Saliency {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train with part, synthesis and margin losses from a pretrained checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score the val and test splits and write metrics.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// `mls`, `msp` or `all`.
        #[arg(long, default_value = "mls")]
        scorer: String,
    },
    /// Export mixed pseudo-unknown samples with metadata sidecars.
    SynthDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { common } => commands::gen(&common),
        Command::Pretrain { common, dataset, epochs } => commands::pretrain(&common, &dataset, epochs),
        Command::Saliency { common, dataset, checkpoint } => commands::saliency(&common, &dataset, &checkpoint),
        Command::Train { common, dataset, checkpoint, epochs } => commands::train(&common, &dataset, &checkpoint, epochs),
        Command::Eval { common, dataset, checkpoint, scorer } => commands::eval(&common, &dataset, &checkpoint, &scorer),
        Command::SynthDemo { common, dataset, checkpoint, count } => {
            commands::synth_demo(&common, &dataset, &checkpoint, count)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<osr3d_core::Error>().is_some_and(osr3d_core::Error::is_config);
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
