//! `ftp`: two-stage training, evaluation, ablations and exports over the
//! synthetic video world.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ftp_core::Error;

#[derive(Parser)]
#[command(name = "ftp", version, about = "Four-tiered prompt video classification at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// `key = value` run config; desk defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Contrastive alignment of the feature processors.
    Stage1 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Enabled prompts, e.g. `ABCD` or `AC`.
        #[arg(long)]
        prompts: Option<String>,
        /// Keyframes per description.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Classification fine-tuning, from a stage-1 checkpoint or from scratch.
    Stage2 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, conflicts_with = "no_ftp")]
        checkpoint: Option<PathBuf>,
        /// Baseline run without feature processors.
        #[arg(long)]
        no_ftp: bool,
    },
    /// Top-1, top-5 and per-class accuracy of a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Saved dataset directory; regenerated from the config when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "heldout")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prompt-subset by keyframe-count by seed ablation.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subsets, e.g. `none,A,AB,ABCD`; the baseline is always added.
        #[arg(long, default_value = "none,ABCD")]
        prompts: String,
        /// Comma-separated keyframe counts.
        #[arg(long, default_value = "5")]
        k: String,
        /// Comma-separated seeds.
        #[arg(long, default_value = "1,2,3,4,5")]
        seeds: String,
    },
    /// Pre-classifier or processor activations as FTPT plus a labels CSV.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// `pre_classifier`, `v1`, `v2`, `v3` or `v4`.
        #[arg(long)]
        layer: String,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "heldout")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Side-by-side keyframe image of one video.
    Keyframes {
        #[command(flatten)]
        common: Common,
        /// Video index within the split.
        #[arg(long, conflicts_with = "video")]
        index: Option<usize>,
        /// FTPT clip `[frames, H, W, 3]`.
        #[arg(long)]
        video: Option<PathBuf>,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes both splits and the encoder stubs of the configured world.
    Dataset {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
}

/// 2 usage/config, 3 training invariant, 4 data/shape.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Contract(_) => 2,
        Error::FreezeViolation { .. } | Error::NonFiniteGradient { .. } => 3,
        Error::Shape(_) | Error::Format(_) | Error::Io(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Stage1 {
            common,
            out,
            prompts,
            k,
        } => commands::stage1(&common, &out, prompts.as_deref(), k),
        Command::Stage2 {
            common,
            out,
            checkpoint,
            no_ftp,
        } => commands::stage2(&common, &out, checkpoint.as_deref(), no_ftp),
        Command::Eval {
            common,
            checkpoint,
            dataset,
            split,
            out,
        } => commands::eval(&common, &checkpoint, dataset.as_deref(), &split, out.as_deref()),
        Command::Ablate {
            common,
            out,
            prompts,
            k,
            seeds,
        } => commands::ablate(&common, &out, &prompts, &k, &seeds),
        Command::Export {
            common,
            checkpoint,
            layer,
            dataset,
            split,
            out,
        } => commands::export(&common, &checkpoint, &layer, dataset.as_deref(), &split, &out),
        Command::Keyframes {
            common,
            index,
            video,
            split,
            k,
            out,
        } => commands::keyframes(&common, index, video.as_deref(), &split, k, &out),
        Command::Dataset { common, out } => commands::dataset(&common, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
