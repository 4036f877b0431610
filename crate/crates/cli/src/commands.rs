use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use acre::dsp::{logmel, pad_batch, snippet_or_pad, LogMelConfig, StatsAccumulator};
use acre::encoder::{TextEncoder, Vocab};
use acre::ingest::{atomic_write, read_wav, write_spectrogram_cache, write_wav, WavEncoding};
use acre::retrieval::{ablation_run, evaluate_model, rank, EvalSet, RetrievalIndex};
use acre::seed::rng_for;
use acre::space::{
    gradient_check, load_checkpoint, save_checkpoint, train, ModelState, Phase, StepLog, TrainingSet,
};
use acre::synth::{clips_with_variants, tone, unrelated_eval_set, LatentPairModel};
use anyhow::{anyhow, bail, Context, Result};

use crate::config::{EncoderChoice, RunConfig};
use crate::data::{caption_id, Corpus, CorpusCaption, CorpusClip};

pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("{}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    Ok(atomic_write(path, text.as_bytes())?)
}

fn loss_csv(log: &[StepLog]) -> String {
    let mut out = String::from("step,lr,loss\n");
    for r in log {
        let _ = writeln!(out, "{},{},{}", r.step, r.lr, r.loss);
    }
    out
}

pub fn preprocess(cfg: &RunConfig) -> Result<()> {
    if cfg.manifests.is_empty() {
        bail!("no manifest given");
    }
    ensure_dir(&cfg.out)?;
    let mel = LogMelConfig::default();
    let mut ids = Vec::new();
    let mut waves = Vec::new();
    for m in &cfg.manifests {
        let dir = cfg.audio_dir_for(m);
        for r in acre::ingest::load_manifest(m)? {
            let wave = read_wav::<f32>(&r.resolve_audio(&dir))?;
            let mut rng = rng_for(cfg.seed, &format!("snippet/{}", r.clip_id));
            waves.push(snippet_or_pad(&wave, cfg.snippet_seconds, &mut rng)?);
            ids.push(r.clip_id);
        }
    }
    let mut stats = StatsAccumulator::default();
    let mut specs = Vec::with_capacity(waves.len());
    for (id, w) in ids.into_iter().zip(pad_batch(&waves)) {
        let s = logmel(&w, &mel).with_context(|| format!("clip `{id}`"))?;
        stats.push(&s);
        specs.push((id, s));
    }
    let stats = stats.finish()?;
    let frames = specs.first().map(|s| s.1.frames()).unwrap_or(0);
    write_spectrogram_cache(&specs, &cfg.out.join("spectrograms.cache"))?;
    write_text(
        &cfg.out.join("whitening.toml"),
        &format!("whiten_mean = {:?}\nwhiten_std = {:?}\n", stats.mean(), stats.std()),
    )?;
    println!(
        "preprocessed {} clips ({} frames each); whitening mean {:.4} std {:.4}",
        specs.len(),
        frames,
        stats.mean(),
        stats.std()
    );
    Ok(())
}

pub fn embed(cfg: &RunConfig, text_only: bool) -> Result<()> {
    if let EncoderChoice::Dump(_) = cfg.encoder {
        bail!("embed runs the toy encoders; a dump directory already holds embeddings");
    }
    let corpus = Corpus::load(cfg, !text_only)?;
    let written = corpus.write_dumps(&cfg.out)?;
    let captions: usize = corpus.clips.iter().map(|c| c.captions.len()).sum();
    let audio = corpus.clips.iter().filter(|c| c.audio.is_some()).count();
    println!("embedded {audio} audio clips and {captions} captions into {}", cfg.out.display());
    for p in written {
        println!("  {}", p.display());
    }
    Ok(())
}

fn load_state(cfg: &RunConfig) -> Result<ModelState<f32>> {
    let path = cfg.checkpoint.as_ref().ok_or_else(|| anyhow!("--checkpoint is required"))?;
    Ok(load_checkpoint::<f32>(path)?.state)
}

fn check_dims(state: &ModelState<f32>, audio: usize, text: usize) -> Result<()> {
    if state.audio.d_in() != audio || state.text.d_in() != text {
        bail!(
            "checkpoint expects audio/text inputs of {}/{} dims but the data has {}/{}",
            state.audio.d_in(),
            state.text.d_in(),
            audio,
            text
        );
    }
    Ok(())
}

fn run_phase(cfg: &RunConfig, phase: Phase) -> Result<()> {
    let corpus = Corpus::load(cfg, true)?;
    let set = corpus.training_set()?;
    let mut state = match (phase, &cfg.checkpoint) {
        (Phase::Pretrain, None) => ModelState::init(set.audio_dim(), set.text_dim(), &cfg.train),
        _ => load_state(cfg)?,
    };
    check_dims(&state, set.audio_dim(), set.text_dim())?;
    if phase == Phase::Finetune && cfg.train.swap_prob > 0.0 && !corpus.has_all_variants() && !cfg.strict {
        eprintln!("warning: some captions have no augmented variants; they are used unchanged");
    }
    let probe_before = state.probe_loss(&set, &cfg.train)?.value;
    let log = train(&mut state, &set, &cfg.train, phase)?;
    let probe_after = state.probe_loss(&set, &cfg.train)?.value;

    ensure_dir(&cfg.out)?;
    let ckpt = cfg.out.join(CHECKPOINT_FILE);
    save_checkpoint(&ckpt, &state, cfg.train.fingerprint())?;
    let csv_name = if phase == Phase::Pretrain { "loss.csv" } else { "finetune_loss.csv" };
    write_text(&cfg.out.join(csv_name), &loss_csv(&log))?;
    println!(
        "{} steps on {} clips: probe loss {:.6} -> {:.6}; checkpoint {}",
        log.len(),
        set.len(),
        probe_before,
        probe_after,
        ckpt.display()
    );
    Ok(())
}

pub fn train_cmd(cfg: &RunConfig) -> Result<()> {
    run_phase(cfg, Phase::Pretrain)
}

pub fn finetune(cfg: &RunConfig) -> Result<()> {
    if cfg.checkpoint.is_none() {
        bail!("finetune needs --checkpoint from a pretraining run");
    }
    run_phase(cfg, Phase::Finetune)
}

fn write_report(out: &Path, eval: &acre::retrieval::Evaluation) -> Result<()> {
    ensure_dir(out)?;
    write_text(&out.join("metrics.csv"), &eval.report.to_csv())?;
    write_text(&out.join("metrics.txt"), &eval.report.to_string())?;
    let mut ranks = String::from("query_id,rank\n");
    for (q, r) in &eval.ranks {
        let _ = writeln!(ranks, "{q},{r}");
    }
    write_text(&out.join("ranks.csv"), &ranks)
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let state = load_state(cfg)?;
    let set = Corpus::load(cfg, true)?.eval_set()?;
    check_dims(&state, set.audio[0].len(), set.queries.first().map_or(0, |q| q.vector.len()))?;
    let eval = evaluate_model(&state, &set)?;
    write_report(&cfg.out, &eval)?;
    print!("{}", eval.report);
    Ok(())
}

pub fn rank_cmd(cfg: &RunConfig, query: Option<&str>, query_id: Option<&str>, top: usize) -> Result<()> {
    let state = load_state(cfg)?;
    let corpus = Corpus::load(cfg, true)?;
    let raw = match (query, query_id) {
        (Some(text), None) => {
            if cfg.encoder != EncoderChoice::Toy {
                bail!("free-text queries need the toy encoder; use --query-id with dumps");
            }
            let vocab = Vocab::shipped();
            TextEncoder::<f32>::new(cfg.encoder_params, vocab.len())?.encode_caption(&vocab, text)?
        }
        (None, Some(id)) => corpus
            .clips
            .iter()
            .flat_map(|c| c.captions.iter().enumerate().map(move |(k, cap)| (caption_id(&c.id, k), cap)))
            .find(|(cid, _)| cid == id)
            .map(|(_, cap)| cap.text.clone())
            .ok_or_else(|| anyhow!("unknown caption id `{id}`"))?,
        _ => bail!("pass exactly one of --query and --query-id"),
    };
    let set = corpus.eval_set()?;
    let index = RetrievalIndex::build(set.audio_ids, state.audio.project_batch(&set.audio)?)?;
    let hits = rank(&state.text.project(&raw)?, &index)?;
    for (i, h) in hits.iter().take(top).enumerate() {
        println!("{}\t{}\t{:.6}", i + 1, h.id, h.score);
    }
    Ok(())
}

/// Returns whether every shape passed.
pub fn grad_check(seed: u64, shapes: &[(usize, usize, usize)], temperature: f64, perturb: bool) -> Result<bool> {
    let bump = |g: &mut [f64]| {
        if let Some(v) = g.first_mut() {
            *v = *v * 1.01 + 1e-3;
        }
    };
    let tamper: Option<&dyn Fn(&mut [f64])> = if perturb { Some(&bump) } else { None };
    let mut worst: f64 = 0.0;
    for &(n, d_in, d_out) in shapes {
        let r = gradient_check(n, d_in, d_out, seed, temperature, tamper)?;
        println!(
            "N={n} D_in={d_in} D_out={d_out}: {} params, max relative error {:.3e}, max |gradient| {:.3e}",
            r.params, r.max_rel_error, r.max_abs_gradient
        );
        worst = worst.max(r.max_rel_error);
    }
    let pass = worst < 1e-4;
    println!("max relative error {worst:.3e} (threshold 1e-4): {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

pub struct AblateArgs {
    pub combos: Vec<Vec<String>>,
    pub datasets: Vec<(String, PathBuf)>,
    pub heldout: Option<PathBuf>,
    pub clips: usize,
    pub heldout_clips: usize,
}

pub fn ablate(cfg: &RunConfig, args: &AblateArgs) -> Result<()> {
    let mut sources: BTreeMap<String, TrainingSet<f32>> = BTreeMap::new();
    let heldout: EvalSet<f32> = if args.datasets.is_empty() {
        let model = LatentPairModel::standard(cfg.seed);
        for name in args.combos.iter().flatten() {
            if !sources.contains_key(name) {
                sources.insert(name.clone(), model.training_set(args.clips, cfg.seed, &format!("dataset-{name}")));
            }
        }
        model.eval_set(args.heldout_clips, cfg.seed, "heldout")
    } else {
        for (name, dir) in &args.datasets {
            sources.insert(name.clone(), Corpus::from_dumps(dir)?.training_set()?);
        }
        let dir = args.heldout.as_ref().ok_or_else(|| anyhow!("--heldout is required with --dataset"))?;
        Corpus::from_dumps(dir)?.eval_set()?
    };
    let table = ablation_run(&args.combos, &sources, &heldout, &cfg.train)?;
    ensure_dir(&cfg.out)?;
    write_text(&cfg.out.join("ablation.csv"), &table.to_csv())?;
    write_text(&cfg.out.join("ablation.txt"), &table.to_string())?;
    print!("{table}");
    Ok(())
}

pub struct SynthArgs {
    pub clips: usize,
    pub unrelated: bool,
    pub variants: usize,
    pub wav_seconds: Option<f64>,
}

const TONE_WORDS: [&str; 5] = ["tone", "beep", "hum", "whistle", "signal"];

pub fn synth(cfg: &RunConfig, args: &SynthArgs) -> Result<()> {
    ensure_dir(&cfg.out)?;
    if let Some(seconds) = args.wav_seconds {
        return synth_wav(&cfg.out, args.clips, seconds, args.variants > 0);
    }
    let clips = if args.unrelated {
        let set = unrelated_eval_set::<f32>(args.clips, 64, 48, cfg.seed);
        set.audio_ids
            .into_iter()
            .zip(set.audio)
            .zip(set.queries)
            .map(|((id, audio), q)| CorpusClip {
                id,
                audio: Some(audio),
                views: vec![],
                captions: vec![CorpusCaption { text: q.vector, variants: vec![] }],
            })
            .collect()
    } else {
        let model = LatentPairModel::standard(cfg.seed);
        let set = if args.variants > 0 {
            clips_with_variants::<f32>(&model, args.clips, args.variants, cfg.seed)
        } else {
            model.training_set::<f32>(args.clips, cfg.seed, "synth")
        };
        set.clips()
            .iter()
            .map(|c| CorpusClip {
                id: c.id.clone(),
                audio: Some(c.audio_views[0].clone()),
                views: vec![],
                captions: c
                    .captions
                    .iter()
                    .map(|k| CorpusCaption { text: k.text.clone(), variants: k.variants.clone() })
                    .collect(),
            })
            .collect()
    };
    let corpus = Corpus { clips };
    corpus.write_dumps(&cfg.out)?;
    println!("wrote {} synthetic clips to {}", corpus.clips.len(), cfg.out.display());
    Ok(())
}

fn synth_wav(out: &Path, clips: usize, seconds: f64, with_variants: bool) -> Result<()> {
    let mut manifest = String::from("file_name,caption_1,caption_2,caption_3,caption_4,caption_5,keywords\n");
    let mut augmented = String::new();
    for i in 0..clips {
        let freq = 220.0 * (1.0 + i as f64 * 0.25);
        let name = format!("tone_{i:03}.wav");
        write_wav(&out.join(&name), &tone::<f32>(freq, seconds, 0.5), WavEncoding::Pcm16)?;
        let hz = freq.round() as u32;
        let captions: Vec<String> =
            TONE_WORDS.iter().enumerate().map(|(k, w)| format!("a {w} at {hz} hz number {k}")).collect();
        let _ = writeln!(manifest, "{name},{},{hz};{}", captions.join(","), TONE_WORDS[i % 5]);
        if with_variants {
            for (k, c) in captions.iter().enumerate() {
                let variants: Vec<String> = (0..5).map(|j| format!("{c} version {j}")).collect();
                let line = jsonl_record(&name, k, &variants);
                augmented.push_str(&line);
            }
        }
    }
    write_text(&out.join("manifest.csv"), &manifest)?;
    if with_variants {
        write_text(&out.join("augmented.jsonl"), &augmented)?;
    }
    println!("wrote {clips} tone clips of {seconds} s to {}", out.display());
    Ok(())
}

fn jsonl_record(clip: &str, k: usize, variants: &[String]) -> String {
    let quoted: Vec<String> = variants.iter().map(|v| format!("\"{v}\"")).collect();
    format!("{{\"clip_id\":\"{clip}\",\"caption_index\":{k},\"variants\":[{}]}}\n", quoted.join(","))
}
