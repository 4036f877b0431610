//! Frozen-encoder outputs for a run, computed by the toy encoders from
//! manifests and WAV files or read back from embedding dumps.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use acre::dsp::{logmel, snippet_or_pad, whiten, LogMelConfig};
use acre::encoder::{AudioEncoder, TextEncoder, Vocab};
use acre::ingest::{
    load_augmented_captions, load_manifest, read_embedding_dump, read_wav, write_embedding_dump, AugmentationMap,
    ClipRecord, EmbeddingDump,
};
use acre::retrieval::{EvalSet, Query};
use acre::seed::rng_for;
use acre::space::{CaptionEmbeddings, ClipEmbeddings, TrainingSet};
use anyhow::{anyhow, bail, Context, Result};

use crate::config::{EncoderChoice, RunConfig};

pub const AUDIO_DUMP: &str = "audio.emb";
pub const TEXT_DUMP: &str = "text.emb";
pub const VIEWS_DUMP: &str = "audio_views.emb";

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusCaption {
    pub text: Vec<f32>,
    pub variants: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusClip {
    pub id: String,
    /// Full-grid audio embedding; absent for text-only runs.
    pub audio: Option<Vec<f32>>,
    /// Patchout views used for training; may be empty.
    pub views: Vec<Vec<f32>>,
    pub captions: Vec<CorpusCaption>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub clips: Vec<CorpusClip>,
}

pub fn caption_id(clip: &str, k: usize) -> String {
    format!("{clip}#{k}")
}

fn variant_id(clip: &str, k: usize, j: usize) -> String {
    format!("{clip}#{k}~{j}")
}

fn view_id(clip: &str, v: usize) -> String {
    format!("{clip}@{v}")
}

/// Splits `clip#k` or `clip#k~j`.
fn parse_text_id(id: &str) -> Option<(&str, usize, Option<usize>)> {
    let (clip, rest) = id.rsplit_once('#')?;
    match rest.split_once('~') {
        Some((k, j)) => Some((clip, k.parse().ok()?, Some(j.parse().ok()?))),
        None => Some((clip, rest.parse().ok()?, None)),
    }
}

fn load_records(cfg: &RunConfig) -> Result<Vec<(ClipRecord, PathBuf)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for m in &cfg.manifests {
        let dir = cfg.audio_dir_for(m);
        for r in load_manifest(m)? {
            if !seen.insert(r.clip_id.clone()) {
                bail!("{}: clip `{}` already listed by an earlier manifest", m.display(), r.clip_id);
            }
            out.push((r, dir.clone()));
        }
    }
    Ok(out)
}

fn load_augmentations(cfg: &RunConfig, records: &[ClipRecord]) -> Result<Option<AugmentationMap>> {
    let Some(path) = &cfg.augmented_captions else { return Ok(None) };
    let map = AugmentationMap::new(load_augmented_captions(path)?);
    map.validate_against(records)?;
    Ok(Some(map))
}

impl Corpus {
    /// Builds the corpus named by the run config. `with_audio` is false for
    /// text-only embedding.
    pub fn load(cfg: &RunConfig, with_audio: bool) -> Result<Self> {
        match &cfg.encoder {
            EncoderChoice::Toy => Self::from_toy(cfg, with_audio),
            EncoderChoice::Dump(dir) => {
                let corpus = Self::from_dumps(dir)?;
                if cfg.manifests.is_empty() {
                    return Ok(corpus);
                }
                let keep: Vec<String> = load_records(cfg)?.into_iter().map(|(r, _)| r.clip_id).collect();
                corpus.restrict(&keep)
            }
        }
    }

    fn from_toy(cfg: &RunConfig, with_audio: bool) -> Result<Self> {
        if cfg.manifests.is_empty() {
            bail!("no manifest given; pass --manifest or set `manifest` in the config");
        }
        let records = load_records(cfg)?;
        let plain: Vec<ClipRecord> = records.iter().map(|(r, _)| r.clone()).collect();
        let aug = load_augmentations(cfg, &plain)?;

        let vocab = Vocab::shipped();
        let text_encoder = TextEncoder::<f32>::new(cfg.encoder_params, vocab.len())?;
        let audio_encoder = AudioEncoder::<f32>::new(cfg.encoder_params, cfg.geometry.patch_dim())?;
        let mel = LogMelConfig::default();
        let seg_frames = mel.frames_for_seconds(cfg.geometry.max_input_seconds);

        let mut clips = Vec::with_capacity(records.len());
        for (record, dir) in &records {
            let id = &record.clip_id;
            let mut captions = Vec::with_capacity(record.captions.len());
            for (k, caption) in record.captions.iter().enumerate() {
                let text = text_encoder.encode_caption(&vocab, caption)?;
                let variants = match aug.as_ref().and_then(|a| a.variants(id, k)) {
                    Some(vs) => vs
                        .iter()
                        .map(|v| text_encoder.encode_caption(&vocab, v))
                        .collect::<Result<Vec<_>, _>>()?,
                    None => vec![],
                };
                captions.push(CorpusCaption { text, variants });
            }
            let (audio, views) = if with_audio {
                let path = record.resolve_audio(dir);
                let wave = read_wav::<f32>(&path)?;
                let wave = snippet_or_pad(&wave, cfg.snippet_seconds, &mut rng_for(cfg.seed, &format!("snippet/{id}")))?;
                let spec = logmel(&wave, &mel).with_context(|| format!("{}", path.display()))?;
                let spec = whiten(&spec, &cfg.whitening);
                let full = audio_encoder
                    .embed_spectrogram::<acre::seed::Rng>(&spec, &cfg.geometry, seg_frames, None)
                    .with_context(|| format!("{}", path.display()))?;
                let views = (0..cfg.patchout_views)
                    .map(|v| {
                        let mut rng = rng_for(cfg.seed, &format!("patchout/{id}/{v}"));
                        audio_encoder.embed_spectrogram(&spec, &cfg.geometry, seg_frames, Some(&mut rng))
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .with_context(|| format!("{}", path.display()))?;
                (Some(full), views)
            } else {
                (None, vec![])
            };
            clips.push(CorpusClip { id: id.clone(), audio, views, captions });
        }
        Ok(Self { clips })
    }

    /// Reads `audio.emb`, `text.emb` and, if present, `audio_views.emb`.
    pub fn from_dumps(dir: &Path) -> Result<Self> {
        let audio = read_embedding_dump(&dir.join(AUDIO_DUMP))?;
        let text = read_embedding_dump(&dir.join(TEXT_DUMP))?;
        let views_path = dir.join(VIEWS_DUMP);
        let views = if views_path.exists() { Some(read_embedding_dump(&views_path)?) } else { None };

        let mut captions: BTreeMap<&str, BTreeMap<usize, (Option<Vec<f32>>, BTreeMap<usize, Vec<f32>>)>> =
            BTreeMap::new();
        for (id, v) in text.entries() {
            let (clip, k, j) = parse_text_id(id)
                .ok_or_else(|| anyhow!("{}: caption id `{id}` is not `<clip>#<k>`", dir.join(TEXT_DUMP).display()))?;
            let slot = captions.entry(clip).or_default().entry(k).or_default();
            match j {
                None => slot.0 = Some(v.clone()),
                Some(j) => {
                    slot.1.insert(j, v.clone());
                }
            }
        }
        let mut view_map: BTreeMap<&str, Vec<Vec<f32>>> = BTreeMap::new();
        if let Some(views) = &views {
            for (id, v) in views.entries() {
                let (clip, _) = id.rsplit_once('@').ok_or_else(|| anyhow!("view id `{id}` is not `<clip>@<v>`"))?;
                view_map.entry(clip).or_default().push(v.clone());
            }
        }

        let mut clips = Vec::with_capacity(audio.len());
        for (id, v) in audio.entries() {
            let caps = captions
                .remove(id.as_str())
                .ok_or_else(|| anyhow!("{}: clip `{id}` has no captions", dir.join(TEXT_DUMP).display()))?;
            let caps = caps
                .into_iter()
                .map(|(k, (text, variants))| {
                    let text = text.ok_or_else(|| anyhow!("clip `{id}` caption {k} has variants but no caption"))?;
                    Ok(CorpusCaption { text, variants: variants.into_values().collect() })
                })
                .collect::<Result<Vec<_>>>()?;
            clips.push(CorpusClip {
                id: id.clone(),
                audio: Some(v.clone()),
                views: view_map.remove(id.as_str()).unwrap_or_default(),
                captions: caps,
            });
        }
        if let Some(orphan) = captions.keys().next() {
            bail!("{}: captions for `{orphan}` have no audio entry", dir.join(TEXT_DUMP).display());
        }
        Ok(Self { clips })
    }

    fn restrict(self, ids: &[String]) -> Result<Self> {
        let mut by_id: BTreeMap<String, CorpusClip> = self.clips.into_iter().map(|c| (c.id.clone(), c)).collect();
        let clips = ids
            .iter()
            .map(|id| by_id.remove(id).ok_or_else(|| anyhow!("clip `{id}` from the manifest is missing in the dump")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { clips })
    }

    pub fn write_dumps(&self, out: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out).with_context(|| format!("{}", out.display()))?;
        let mut written = Vec::new();
        let audio: Vec<(String, Vec<f32>)> =
            self.clips.iter().filter_map(|c| c.audio.clone().map(|a| (c.id.clone(), a))).collect();
        if !audio.is_empty() {
            let path = out.join(AUDIO_DUMP);
            write_embedding_dump(&EmbeddingDump::new(audio)?, &path)?;
            written.push(path);
        }
        let views: Vec<(String, Vec<f32>)> = self
            .clips
            .iter()
            .flat_map(|c| c.views.iter().enumerate().map(|(v, e)| (view_id(&c.id, v), e.clone())))
            .collect();
        if !views.is_empty() {
            let path = out.join(VIEWS_DUMP);
            write_embedding_dump(&EmbeddingDump::new(views)?, &path)?;
            written.push(path);
        }
        let mut text = Vec::new();
        for c in &self.clips {
            for (k, cap) in c.captions.iter().enumerate() {
                text.push((caption_id(&c.id, k), cap.text.clone()));
                for (j, v) in cap.variants.iter().enumerate() {
                    text.push((variant_id(&c.id, k, j), v.clone()));
                }
            }
        }
        let path = out.join(TEXT_DUMP);
        write_embedding_dump(&EmbeddingDump::new(text)?, &path)?;
        written.push(path);
        Ok(written)
    }

    fn audio_of(c: &CorpusClip) -> Result<&Vec<f32>> {
        c.audio.as_ref().ok_or_else(|| anyhow!("clip `{}` has no audio embedding", c.id))
    }

    pub fn training_set(&self) -> Result<TrainingSet<f32>> {
        let clips = self
            .clips
            .iter()
            .map(|c| {
                let audio_views = if c.views.is_empty() { vec![Self::audio_of(c)?.clone()] } else { c.views.clone() };
                let captions = c
                    .captions
                    .iter()
                    .map(|k| CaptionEmbeddings { text: k.text.clone(), variants: k.variants.clone() })
                    .collect();
                Ok(ClipEmbeddings { id: c.id.clone(), audio_views, captions })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingSet::new(clips)?)
    }

    /// Every caption becomes its own query targeting its clip.
    pub fn eval_set(&self) -> Result<EvalSet<f32>> {
        let mut audio_ids = Vec::with_capacity(self.clips.len());
        let mut audio = Vec::with_capacity(self.clips.len());
        let mut queries = Vec::new();
        for c in &self.clips {
            audio_ids.push(c.id.clone());
            audio.push(Self::audio_of(c)?.clone());
            for (k, cap) in c.captions.iter().enumerate() {
                queries.push(Query { id: caption_id(&c.id, k), target: c.id.clone(), vector: cap.text.clone() });
            }
        }
        Ok(EvalSet { audio_ids, audio, queries })
    }

    pub fn has_all_variants(&self) -> bool {
        self.clips.iter().all(|c| c.captions.iter().all(|k| !k.variants.is_empty()))
    }
}
