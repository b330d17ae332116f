use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "acrnn", version, about = "Environmental sound classification with an attention-based CRNN")]
pub struct Cli {
    /// Only print warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    /// Also print debug messages.
    #[arg(short, long, global = true, conflicts_with = "quiet")]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn log_level(&self) -> &'static str {
        match (self.quiet, self.verbose) {
            (true, _) => "warn",
            (_, true) => "debug",
            _ => "info",
        }
    }
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Run configuration (`key = value` lines). A manifest written by an
    /// earlier run of the same subcommand also works; its recorded
    /// arguments then serve as defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one configuration key, e.g. `--set train.epochs=5`.
    /// Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_kv)]
    pub set: Vec<(String, String)>,

    /// Seed for augmentation, initialization, batching and mixup.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Directory for the run manifest and other outputs.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

/// Where the cached features come from.
#[derive(Args, Debug, Clone, Default)]
pub struct Data {
    /// Feature cache written by `extract`.
    #[arg(long, value_name = "FILE")]
    pub cache: Option<PathBuf>,

    /// Metadata CSV; supplies class names and the class count.
    #[arg(long, value_name = "FILE")]
    pub meta: Option<PathBuf>,

    /// Dataset variant of the metadata: esc10, esc50 or custom.
    #[arg(long)]
    pub variant: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decode the audio listed in a metadata CSV and write a feature cache.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Metadata CSV (filename, fold, target, category columns).
        #[arg(long, value_name = "FILE")]
        meta: Option<PathBuf>,
        /// Directory holding the audio files.
        #[arg(long, value_name = "DIR")]
        data_dir: Option<PathBuf>,
        /// Cache file to write.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Dataset variant: esc10, esc50 or custom.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Train one model; writes last.ckpt, best.ckpt and history.csv.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        /// Fold excluded from training and used for validation.
        #[arg(long, value_name = "FOLD")]
        held_out: Option<u8>,
    },
    /// Score a checkpoint on one fold.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        /// Checkpoint written by `train`.
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// Fold to evaluate.
        #[arg(long)]
        fold: Option<u8>,
        /// Accuracy report CSV (default: <out-dir>/report.csv).
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Confusion matrix CSV (default: <out-dir>/confusion.csv).
        #[arg(long, value_name = "FILE")]
        confusion: Option<PathBuf>,
    },
    /// Cross-validate over the folds present in the cache.
    Cv {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        /// Per-fold accuracy report CSV (default: <out-dir>/report.csv).
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Confusion matrix summed over folds (default: <out-dir>/confusion.csv).
        #[arg(long, value_name = "FILE")]
        confusion: Option<PathBuf>,
    },
    /// Cross-validate every attention placement, or with --grid the
    /// attention/augmentation on-off grid.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        /// Ablation CSV (default: <out-dir>/ablation.csv).
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Run the attention × augmentation grid instead of the placements.
        #[arg(long)]
        grid: bool,
    },
    /// Compare analytic gradients with finite differences for every
    /// operation and for a reduced network.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Attention placements to check the network with, comma separated,
        /// or `all` (default: none,l4,l10).
        #[arg(long, value_delimiter = ',')]
        placements: Vec<String>,
    },
}
