//! `acre`: preprocess audio, embed, train, fine-tune, evaluate and rank
//! with the audio-caption retrieval engine.

mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use acre::dsp::DspError;
use acre::encoder::EncoderError;
use acre::ingest::IngestError;
use acre::retrieval::RetrievalError;
use acre::space::SpaceError;
use config::{CommonArgs, EpochTarget, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "acre", version, about = "Contrastive audio-caption retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute log-mel spectrograms and whitening statistics for a manifest.
    Preprocess(CommonArgs),
    /// Write audio and caption embedding dumps with the toy encoders.
    Embed {
        #[command(flatten)]
        common: CommonArgs,
        /// Embed captions only.
        #[arg(long)]
        text_only: bool,
    },
    /// Pretrain the projection heads.
    Train(CommonArgs),
    /// Fine-tune from a checkpoint with caption swapping.
    Finetune(CommonArgs),
    /// Report mAP@10 and R@k on a manifest or dump.
    Evaluate(CommonArgs),
    /// Rank the indexed clips for one caption.
    Rank {
        #[command(flatten)]
        common: CommonArgs,
        /// Free-text query (toy encoder).
        #[arg(long)]
        query: Option<String>,
        /// Caption id `<clip>#<k>` from the corpus.
        #[arg(long)]
        query_id: Option<String>,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Compare analytic loss gradients with finite differences.
    GradCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Batch shape `N,D_IN,D_OUT`; repeatable.
        #[arg(long = "shape", value_parser = parse_shape)]
        shapes: Vec<(usize, usize, usize)>,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, hide = true)]
        perturb: bool,
    },
    /// Train one model per dataset combination and compare mAP@10.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated combinations, datasets joined by `+`.
        #[arg(long, default_value = "A,B,A+B")]
        combos: String,
        /// `NAME=<dump dir>`; without any, datasets are synthetic.
        #[arg(long = "dataset", value_parser = parse_dataset)]
        datasets: Vec<(String, PathBuf)>,
        /// Held-out dump directory used with `--dataset`.
        #[arg(long)]
        heldout: Option<PathBuf>,
        /// Clips per synthetic dataset.
        #[arg(long, default_value_t = 200)]
        clips: usize,
        #[arg(long, default_value_t = 50)]
        heldout_clips: usize,
    },
    /// Write a synthetic dataset as embedding dumps or tone WAVs.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 200)]
        clips: usize,
        /// Audio and text drawn independently.
        #[arg(long)]
        unrelated: bool,
        /// Rephrasings per caption.
        #[arg(long, default_value_t = 0)]
        variants: usize,
        /// Write tone WAVs of this length plus a manifest instead of dumps.
        #[arg(long)]
        wav_seconds: Option<f64>,
    },
}

fn parse_shape(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [n, d_in, d_out] if n > 0 && d_in > 0 && d_out > 0 => Ok((n, d_in, d_out)),
        _ => Err("expected three positive integers N,D_IN,D_OUT".into()),
    }
}

fn parse_dataset(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, dir)) if !name.is_empty() && !dir.is_empty() => Ok((name.to_string(), PathBuf::from(dir))),
        _ => Err("expected NAME=<dir>".into()),
    }
}

enum Outcome {
    Done,
    CheckFailed,
}

fn run(cli: Cli) -> Result<Outcome> {
    use Command::*;
    match cli.command {
        Preprocess(a) => commands::preprocess(&RunConfig::resolve(&a, EpochTarget::Pretrain)?)?,
        Embed { common, text_only } => commands::embed(&RunConfig::resolve(&common, EpochTarget::Pretrain)?, text_only)?,
        Train(a) => commands::train_cmd(&RunConfig::resolve(&a, EpochTarget::Pretrain)?)?,
        Finetune(a) => commands::finetune(&RunConfig::resolve(&a, EpochTarget::Finetune)?)?,
        Evaluate(a) => commands::evaluate(&RunConfig::resolve(&a, EpochTarget::Pretrain)?)?,
        Rank { common, query, query_id, top } => commands::rank_cmd(
            &RunConfig::resolve(&common, EpochTarget::Pretrain)?,
            query.as_deref(),
            query_id.as_deref(),
            top,
        )?,
        GradCheck { seed, shapes, temperature, perturb } => {
            if !(temperature > 0.0) {
                bail!("temperature must be positive");
            }
            let shapes = if shapes.is_empty() { vec![(8, 16, 12), (4, 32, 8), (64, 24, 16)] } else { shapes };
            if !commands::grad_check(seed, &shapes, temperature, perturb)? {
                return Ok(Outcome::CheckFailed);
            }
        }
        Ablate { common, combos, datasets, heldout, clips, heldout_clips } => {
            let combos: Vec<Vec<String>> = combos
                .split(',')
                .map(|c| c.split('+').map(|d| d.trim().to_string()).filter(|d| !d.is_empty()).collect())
                .collect();
            let args = commands::AblateArgs { combos, datasets, heldout, clips, heldout_clips };
            commands::ablate(&RunConfig::resolve(&common, EpochTarget::Pretrain)?, &args)?
        }
        Synth { common, clips, unrelated, variants, wav_seconds } => {
            let args = commands::SynthArgs { clips, unrelated, variants, wav_seconds };
            commands::synth(&RunConfig::resolve(&common, EpochTarget::Pretrain)?, &args)?
        }
    }
    Ok(Outcome::Done)
}

/// Short machine-readable class of an error, taken from the innermost
/// library error in the chain.
fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<IngestError>() {
            return match err {
                IngestError::Io { .. } => "io",
                IngestError::MissingColumn { .. }
                | IngestError::DuplicateClipId { .. }
                | IngestError::WrongCaptionCount { .. }
                | IngestError::MalformedRow { .. } => "manifest",
                IngestError::VariantCountMismatch { .. }
                | IngestError::DuplicateAugmentation { .. }
                | IngestError::UnknownClipId(_) => "augmented-captions",
                IngestError::UnsupportedEncoding { .. } | IngestError::CorruptHeader { .. } => "wav",
                _ => "dump",
            };
        }
        if let Some(err) = cause.downcast_ref::<SpaceError>() {
            return match err {
                SpaceError::Checkpoint { .. } => "checkpoint",
                SpaceError::MissingAugmentation { .. } => "missing-augmentation",
                SpaceError::InvalidConfig(_) => "config",
                _ => "training",
            };
        }
        if cause.downcast_ref::<DspError>().is_some() {
            return "dsp";
        }
        if cause.downcast_ref::<EncoderError>().is_some() {
            return "encoder";
        }
        if cause.downcast_ref::<RetrievalError>().is_some() {
            return "retrieval";
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return "config";
        }
    }
    "input"
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {}: {msg}", error_kind(&e));
            ExitCode::from(2)
        }
    }
}
