//! Run configuration: a flat TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use acre::dsp::WhiteningStats;
use acre::encoder::{EncoderParams, PatchGeometry};
use acre::space::TrainConfig;
use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

/// Keys accepted in a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<OneOrMany>,
    pub audio_dir: Option<PathBuf>,
    pub augmented_captions: Option<PathBuf>,
    pub encoder: Option<String>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strict: Option<bool>,
    pub checkpoint: Option<PathBuf>,
    pub batch_size: Option<usize>,
    pub pretrain_epochs: Option<usize>,
    pub warmup_epochs: Option<usize>,
    pub lr_max: Option<f64>,
    pub lr_min: Option<f64>,
    pub finetune_epochs: Option<usize>,
    pub finetune_lr_max: Option<f64>,
    pub swap_prob: Option<f64>,
    pub temperature: Option<f64>,
    pub shared_dim: Option<usize>,
    pub encoder_depth: Option<usize>,
    pub encoder_width: Option<usize>,
    pub encoder_heads: Option<usize>,
    pub patchout_views: Option<usize>,
    pub snippet_seconds: Option<f64>,
    pub whiten_mean: Option<f64>,
    pub whiten_std: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(PathBuf),
    Many(Vec<PathBuf>),
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("{}: invalid config", path.display()))
    }
}

/// Flags shared by the data-driven commands.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat TOML config; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Caption manifest CSV; repeat to combine datasets.
    #[arg(long)]
    pub manifest: Vec<PathBuf>,
    /// Directory holding the manifest's audio files (default: the manifest's directory).
    #[arg(long)]
    pub audio_dir: Option<PathBuf>,
    /// Line-delimited JSON caption rephrasings.
    #[arg(long)]
    pub augmented_captions: Option<PathBuf>,
    /// `toy` or `dump:<dir>` holding audio.emb and text.emb.
    #[arg(long)]
    pub encoder: Option<String>,
    /// Patch geometry preset.
    #[arg(long, value_parser = PatchGeometry::PRESETS)]
    pub preset: Option<String>,
    /// Epoch count of the phase being run.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Turn fallbacks (such as missing caption variants) into errors.
    #[arg(long)]
    pub strict: bool,
    /// Checkpoint to start from or evaluate.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncoderChoice {
    Toy,
    Dump(PathBuf),
}

impl EncoderChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(Self::Toy),
            _ => match s.strip_prefix("dump:") {
                Some(dir) if !dir.is_empty() => Ok(Self::Dump(PathBuf::from(dir))),
                _ => bail!("encoder must be `toy` or `dump:<dir>`, got `{s}`"),
            },
        }
    }
}

/// Which phase's epoch count `--epochs` overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochTarget {
    Pretrain,
    Finetune,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifests: Vec<PathBuf>,
    pub audio_dir: Option<PathBuf>,
    pub augmented_captions: Option<PathBuf>,
    pub encoder: EncoderChoice,
    pub geometry: PatchGeometry,
    pub seed: u64,
    pub out: PathBuf,
    pub strict: bool,
    pub checkpoint: Option<PathBuf>,
    pub train: TrainConfig,
    pub encoder_params: EncoderParams,
    pub patchout_views: usize,
    pub snippet_seconds: f64,
    pub whitening: WhiteningStats,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs, epochs: EpochTarget) -> Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let manifests = if !args.manifest.is_empty() {
            args.manifest.clone()
        } else {
            match file.manifest {
                Some(OneOrMany::One(p)) => vec![p],
                Some(OneOrMany::Many(v)) => v,
                None => vec![],
            }
        };
        let encoder = EncoderChoice::parse(args.encoder.as_deref().or(file.encoder.as_deref()).unwrap_or("toy"))?;
        let preset = args.preset.clone().or(file.preset).unwrap_or_else(|| "passt-s".to_string());
        let geometry = PatchGeometry::preset(&preset)
            .with_context(|| format!("unknown preset `{preset}`; expected one of {:?}", PatchGeometry::PRESETS))?;
        let seed = args.seed.or(file.seed).unwrap_or(0);

        let d = TrainConfig::default();
        let mut train = TrainConfig {
            batch_size: file.batch_size.unwrap_or(d.batch_size),
            pretrain_epochs: file.pretrain_epochs.unwrap_or(d.pretrain_epochs),
            warmup_epochs: file.warmup_epochs.unwrap_or(d.warmup_epochs),
            lr_max: file.lr_max.unwrap_or(d.lr_max),
            lr_min: file.lr_min.unwrap_or(d.lr_min),
            finetune_epochs: file.finetune_epochs.unwrap_or(d.finetune_epochs),
            finetune_lr_max: file.finetune_lr_max.unwrap_or(d.finetune_lr_max),
            swap_prob: file.swap_prob.unwrap_or(d.swap_prob),
            temperature: file.temperature.unwrap_or(d.temperature),
            shared_dim: file.shared_dim.unwrap_or(d.shared_dim),
            seed,
            strict: args.strict || file.strict.unwrap_or(false),
            adam: d.adam,
        };
        if let Some(e) = args.epochs {
            match epochs {
                EpochTarget::Pretrain => train.pretrain_epochs = e,
                EpochTarget::Finetune => train.finetune_epochs = e,
            }
        }
        train.validate()?;

        let ed = EncoderParams::default();
        let encoder_params = EncoderParams {
            seed,
            depth: file.encoder_depth.unwrap_or(ed.depth),
            width: file.encoder_width.unwrap_or(ed.width),
            heads: file.encoder_heads.unwrap_or(ed.heads),
        };
        encoder_params.validate()?;

        let whitening = WhiteningStats::new(file.whiten_mean.unwrap_or(0.0), file.whiten_std.unwrap_or(1.0))?;
        let snippet_seconds = file.snippet_seconds.unwrap_or(30.0);
        if !(snippet_seconds > 0.0) {
            bail!("snippet_seconds must be positive");
        }

        let cfg = Self {
            manifests,
            audio_dir: args.audio_dir.clone().or(file.audio_dir),
            augmented_captions: args.augmented_captions.clone().or(file.augmented_captions),
            encoder,
            geometry,
            seed,
            out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            strict: train.strict,
            checkpoint: args.checkpoint.clone().or(file.checkpoint),
            train,
            encoder_params,
            patchout_views: file.patchout_views.unwrap_or(0),
            snippet_seconds,
            whitening,
        };
        cfg.check_paths()?;
        Ok(cfg)
    }

    fn check_paths(&self) -> Result<()> {
        for p in self.manifests.iter().chain(&self.augmented_captions).chain(&self.audio_dir) {
            if !p.exists() {
                bail!("{}: no such file or directory", p.display());
            }
        }
        if let EncoderChoice::Dump(dir) = &self.encoder {
            if !dir.is_dir() {
                bail!("{}: embedding dump directory not found", dir.display());
            }
        }
        Ok(())
    }

    pub fn audio_dir_for(&self, manifest: &Path) -> PathBuf {
        self.audio_dir
            .clone()
            .unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 3\npreset = \"passt-n\"\nlr_max = 1e-4\npretrain_epochs = 7\n").unwrap();
        let args = CommonArgs { config: Some(path.clone()), seed: Some(9), ..Default::default() };
        let cfg = RunConfig::resolve(&args, EpochTarget::Pretrain).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.geometry, PatchGeometry::passt_n());
        assert_eq!(cfg.train.lr_max, 1e-4);
        assert_eq!(cfg.train.pretrain_epochs, 7);

        let args = CommonArgs { config: Some(path), epochs: Some(0), ..Default::default() };
        assert_eq!(RunConfig::resolve(&args, EpochTarget::Pretrain).unwrap().train.pretrain_epochs, 0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "sed = 3\n").unwrap();
        let args = CommonArgs { config: Some(path.clone()), ..Default::default() };
        assert!(RunConfig::resolve(&args, EpochTarget::Pretrain).is_err());
        std::fs::write(&path, "swap_prob = 2.0\n").unwrap();
        assert!(RunConfig::resolve(&args, EpochTarget::Pretrain).is_err());
    }

    #[test]
    fn encoder_choice_parsing() {
        assert_eq!(EncoderChoice::parse("toy").unwrap(), EncoderChoice::Toy);
        assert_eq!(EncoderChoice::parse("dump:/x").unwrap(), EncoderChoice::Dump("/x".into()));
        assert!(EncoderChoice::parse("dump:").is_err());
        assert!(EncoderChoice::parse("passt").is_err());
    }
}
