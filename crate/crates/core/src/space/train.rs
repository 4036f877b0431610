use rand::seq::SliceRandom;
use rand::Rng;
use sha2::{Digest, Sha256};

use super::{adam_step, loss_gradients, lr_at, AdamConfig, AdamState, LossValue, ProjectionHead, SpaceError};
use crate::seed::rng_for;
use crate::Scalar;

/// Optimization settings for both training phases.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub warmup_epochs: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub finetune_epochs: usize,
    pub finetune_lr_max: f64,
    /// Probability of replacing a sampled caption by one of its variants
    /// during fine-tuning.
    pub swap_prob: f64,
    pub temperature: f64,
    pub shared_dim: usize,
    pub seed: u64,
    /// Fail instead of falling back when a caption has no variants.
    pub strict: bool,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            pretrain_epochs: 16,
            warmup_epochs: 1,
            lr_max: 2e-5,
            lr_min: 1e-7,
            finetune_epochs: 5,
            finetune_lr_max: 8e-6,
            swap_prob: 0.3,
            temperature: 1.0,
            shared_dim: crate::SHARED_DIM,
            seed: 0,
            strict: false,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SpaceError> {
        let bad = |msg: &str| Err(SpaceError::InvalidConfig(msg.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..=1.0).contains(&self.swap_prob) {
            return bad("swap_prob must lie in [0, 1]");
        }
        if !(self.lr_min < self.lr_max) || !(self.lr_min < self.finetune_lr_max) || self.lr_min < 0.0 {
            return bad("lr_min must be nonnegative and below both peak learning rates");
        }
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        if self.shared_dim == 0 {
            return bad("shared_dim must be positive");
        }
        Ok(())
    }

    /// Stable 64-bit digest of every field, stored in checkpoints.
    pub fn fingerprint(&self) -> u64 {
        let text = format!(
            "batch_size={}\npretrain_epochs={}\nwarmup_epochs={}\nlr_max={:e}\nlr_min={:e}\n\
             finetune_epochs={}\nfinetune_lr_max={:e}\nswap_prob={:e}\ntemperature={:e}\n\
             shared_dim={}\nseed={}\nstrict={}\nbeta1={:e}\nbeta2={:e}\neps={:e}\n",
            self.batch_size,
            self.pretrain_epochs,
            self.warmup_epochs,
            self.lr_max,
            self.lr_min,
            self.finetune_epochs,
            self.finetune_lr_max,
            self.swap_prob,
            self.temperature,
            self.shared_dim,
            self.seed,
            self.strict,
            self.adam.beta1,
            self.adam.beta2,
            self.adam.eps,
        );
        let digest = Sha256::digest(text.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Warmup then cosine decay from `lr_max`; captions used as given.
    Pretrain,
    /// No warmup, peak `finetune_lr_max`, fresh optimizer state, caption
    /// swapping with `swap_prob`.
    Finetune,
}

struct PhasePlan {
    epochs: usize,
    warmup_epochs: usize,
    lr_max: f64,
    swap_prob: f64,
}

impl Phase {
    fn plan(self, cfg: &TrainConfig) -> PhasePlan {
        match self {
            Phase::Pretrain => PhasePlan {
                epochs: cfg.pretrain_epochs,
                warmup_epochs: cfg.warmup_epochs,
                lr_max: cfg.lr_max,
                swap_prob: 0.0,
            },
            Phase::Finetune => PhasePlan {
                epochs: cfg.finetune_epochs,
                warmup_epochs: 0,
                lr_max: cfg.finetune_lr_max,
                swap_prob: cfg.swap_prob,
            },
        }
    }
}

/// Frozen-encoder output for one caption and its rephrasings.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionEmbeddings<T> {
    pub text: Vec<T>,
    pub variants: Vec<Vec<T>>,
}

/// Frozen-encoder outputs for one clip. Several audio views (e.g. different
/// patchout draws) may be supplied; one is picked per appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipEmbeddings<T> {
    pub id: String,
    pub audio_views: Vec<Vec<T>>,
    pub captions: Vec<CaptionEmbeddings<T>>,
}

/// Precomputed encoder outputs for a whole training split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    audio_dim: usize,
    text_dim: usize,
    clips: Vec<ClipEmbeddings<T>>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(clips: Vec<ClipEmbeddings<T>>) -> Result<Self, SpaceError> {
        let first = clips.first().ok_or(SpaceError::EmptyDataset)?;
        let audio_dim = first.audio_views.first().map(Vec::len).unwrap_or(0);
        let text_dim = first.captions.first().map(|c| c.text.len()).unwrap_or(0);
        for clip in &clips {
            if clip.audio_views.is_empty() || clip.captions.is_empty() {
                return Err(SpaceError::InvalidConfig(format!("clip `{}` lacks audio or captions", clip.id)));
            }
            if let Some(v) = clip.audio_views.iter().find(|v| v.len() != audio_dim) {
                return Err(SpaceError::DimMismatch { expected: audio_dim, found: v.len() });
            }
            for c in &clip.captions {
                if let Some(v) = std::iter::once(&c.text).chain(&c.variants).find(|v| v.len() != text_dim) {
                    return Err(SpaceError::DimMismatch { expected: text_dim, found: v.len() });
                }
            }
        }
        Ok(Self { audio_dim, text_dim, clips })
    }

    /// Simple paired data: one audio view and one caption per clip.
    pub fn from_pairs(ids: Vec<String>, audio: Vec<Vec<T>>, text: Vec<Vec<T>>) -> Result<Self, SpaceError> {
        if audio.len() != ids.len() || text.len() != ids.len() {
            return Err(SpaceError::DimMismatch { expected: ids.len(), found: audio.len().min(text.len()) });
        }
        let clips = ids
            .into_iter()
            .zip(audio.into_iter().zip(text))
            .map(|(id, (a, t))| ClipEmbeddings {
                id,
                audio_views: vec![a],
                captions: vec![CaptionEmbeddings { text: t, variants: vec![] }],
            })
            .collect();
        Self::new(clips)
    }

    pub fn audio_dim(&self) -> usize {
        self.audio_dim
    }

    pub fn text_dim(&self) -> usize {
        self.text_dim
    }

    pub fn clips(&self) -> &[ClipEmbeddings<T>] {
        &self.clips
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// Concatenates several sets of equal dimensions.
    pub fn concat(sets: &[&TrainingSet<T>]) -> Result<Self, SpaceError> {
        Self::new(sets.iter().flat_map(|s| s.clips.iter().cloned()).collect())
    }

    fn text_of(&self, pick: &Pick) -> &[T] {
        let caption = &self.clips[pick.clip].captions[pick.caption];
        match pick.variant {
            Some(v) => &caption.variants[v],
            None => &caption.text,
        }
    }
}

/// What one batch slot uses: a clip, one of its audio views, one of its
/// captions, and optionally a variant of that caption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pick {
    pub clip: usize,
    pub view: usize,
    pub caption: usize,
    pub variant: Option<usize>,
}

/// Every batch of a phase, in order.
///
/// Each epoch shuffles the clips and cuts full batches of
/// `min(batch_size, clips)`; a trailing partial batch is dropped. Shuffling,
/// caption choice, view choice and swapping draw from independent seeded
/// streams, so a zero swap probability reproduces the pretraining stream.
pub fn batch_stream<T: Scalar>(set: &TrainingSet<T>, cfg: &TrainConfig, phase: Phase) -> Vec<Vec<Pick>> {
    let plan = phase.plan(cfg);
    let n = set.len();
    let batch = cfg.batch_size.min(n).max(1);
    let mut order_rng = rng_for(cfg.seed, "batches");
    let mut caption_rng = rng_for(cfg.seed, "captions");
    let mut view_rng = rng_for(cfg.seed, "views");
    let mut swap_rng = rng_for(cfg.seed, "swap");
    let mut order: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(plan.epochs * (n / batch));
    for _ in 0..plan.epochs {
        order.shuffle(&mut order_rng);
        for chunk in order.chunks_exact(batch) {
            out.push(
                chunk
                    .iter()
                    .map(|&clip| {
                        let c = &set.clips[clip];
                        let caption = caption_rng.gen_range(0..c.captions.len());
                        let view = view_rng.gen_range(0..c.audio_views.len());
                        let mut variant = None;
                        if plan.swap_prob > 0.0 && swap_rng.gen_bool(plan.swap_prob) {
                            let k = c.captions[caption].variants.len();
                            if k > 0 {
                                variant = Some(swap_rng.gen_range(0..k));
                            }
                        }
                        Pick { clip, view, caption, variant }
                    })
                    .collect(),
            );
        }
    }
    out
}

/// Both heads with their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T> {
    pub audio: ProjectionHead<T>,
    pub text: ProjectionHead<T>,
    pub adam_audio: AdamState<T>,
    pub adam_text: AdamState<T>,
    /// Optimization steps taken over all phases.
    pub step: u64,
}

impl<T: Scalar> ModelState<T> {
    pub fn init(audio_dim: usize, text_dim: usize, cfg: &TrainConfig) -> Self {
        let mut rng = rng_for(cfg.seed, "heads");
        let audio = ProjectionHead::init(audio_dim, cfg.shared_dim, &mut rng);
        let text = ProjectionHead::init(text_dim, cfg.shared_dim, &mut rng);
        Self::from_heads(audio, text)
    }

    pub fn from_heads(audio: ProjectionHead<T>, text: ProjectionHead<T>) -> Self {
        Self {
            adam_audio: AdamState::new(audio.params().len()),
            adam_text: AdamState::new(text.params().len()),
            audio,
            text,
            step: 0,
        }
    }

    /// Loss on the first `min(batch_size, len)` clips using view 0 and
    /// caption 0; a fixed probe for monitoring.
    pub fn probe_loss(&self, set: &TrainingSet<T>, cfg: &TrainConfig) -> Result<LossValue<T>, SpaceError> {
        let n = cfg.batch_size.min(set.len());
        let audio: Vec<Vec<T>> = set.clips[..n].iter().map(|c| c.audio_views[0].clone()).collect();
        let text: Vec<Vec<T>> = set.clips[..n].iter().map(|c| c.captions[0].text.clone()).collect();
        let c = super::similarity_matrix(&self.audio.project_batch(&audio)?, &self.text.project_batch(&text)?)?;
        super::nt_xent_loss(&c, T::lit(cfg.temperature))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
}

/// Runs one phase of training in place and returns the per-step log. The
/// loss recorded for a step is the batch loss before that step's update.
pub fn train<T: Scalar>(
    state: &mut ModelState<T>,
    set: &TrainingSet<T>,
    cfg: &TrainConfig,
    phase: Phase,
) -> Result<Vec<StepLog>, SpaceError> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(SpaceError::EmptyDataset);
    }
    if set.audio_dim() != state.audio.d_in() || set.text_dim() != state.text.d_in() {
        return Err(SpaceError::DimMismatch { expected: state.audio.d_in(), found: set.audio_dim() });
    }
    let plan = phase.plan(cfg);
    if phase == Phase::Finetune {
        if cfg.strict && plan.swap_prob > 0.0 {
            for clip in &set.clips {
                if let Some(i) = clip.captions.iter().position(|c| c.variants.is_empty()) {
                    return Err(SpaceError::MissingAugmentation { clip: clip.id.clone(), caption: i });
                }
            }
        }
        state.adam_audio = AdamState::new(state.audio.params().len());
        state.adam_text = AdamState::new(state.text.params().len());
    }

    let stream = batch_stream(set, cfg, phase);
    let total = stream.len() as u64;
    let per_epoch = if plan.epochs == 0 { 0 } else { total / plan.epochs as u64 };
    let warmup = per_epoch * plan.warmup_epochs as u64;
    let temperature = T::lit(cfg.temperature);

    let mut log = Vec::with_capacity(stream.len());
    for (k, batch) in stream.iter().enumerate() {
        let lr = lr_at(k as u64 + 1, total, warmup, plan.lr_max, cfg.lr_min);
        let audio: Vec<Vec<T>> = batch.iter().map(|p| set.clips[p.clip].audio_views[p.view].clone()).collect();
        let text: Vec<Vec<T>> = batch.iter().map(|p| set.text_of(p).to_vec()).collect();
        let g = loss_gradients(&audio, &text, &state.audio, &state.text, temperature)?;
        let lr_t = T::lit(lr);
        adam_step(state.audio.params_mut(), &g.audio, &mut state.adam_audio, lr_t, &cfg.adam)?;
        adam_step(state.text.params_mut(), &g.text, &mut state.adam_text, lr_t, &cfg.adam)?;
        state.step += 1;
        log.push(StepLog { step: state.step, lr, loss: g.loss.value.to_f64_lossy() });
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn toy_set(n: usize, captions: usize, variants: usize) -> TrainingSet<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut v = |d: usize| -> Vec<f64> { (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let clips = (0..n)
            .map(|i| ClipEmbeddings {
                id: format!("c{i:03}"),
                audio_views: vec![v(6)],
                captions: (0..captions)
                    .map(|_| CaptionEmbeddings { text: v(5), variants: (0..variants).map(|_| v(5)).collect() })
                    .collect(),
            })
            .collect();
        TrainingSet::new(clips).unwrap()
    }

    fn cfg() -> TrainConfig {
        TrainConfig { batch_size: 8, pretrain_epochs: 3, finetune_epochs: 3, shared_dim: 16, seed: 5, ..Default::default() }
    }

    #[test]
    fn zero_swap_reproduces_the_pretrain_stream() {
        let set = toy_set(30, 5, 5);
        let c = TrainConfig { swap_prob: 0.0, ..cfg() };
        let pre = batch_stream(&set, &c, Phase::Pretrain);
        let fine = batch_stream(&set, &c, Phase::Finetune);
        assert_eq!(pre, fine);
        assert_eq!(pre.len(), 3 * 3);
        assert!(pre.iter().all(|b| b.len() == 8));
    }

    #[test]
    fn certain_swap_with_one_variant_always_swaps() {
        let set = toy_set(20, 5, 1);
        let c = TrainConfig { swap_prob: 1.0, ..cfg() };
        let stream = batch_stream(&set, &c, Phase::Finetune);
        assert!(stream.iter().flatten().all(|p| p.variant == Some(0)));
        assert!(batch_stream(&set, &c, Phase::Pretrain).iter().flatten().all(|p| p.variant.is_none()));
    }

    #[test]
    fn swap_frequency_concentrates() {
        let set = toy_set(100, 5, 5);
        let c = TrainConfig { swap_prob: 0.3, batch_size: 100, finetune_epochs: 100, ..cfg() };
        let picks: Vec<Pick> = batch_stream(&set, &c, Phase::Finetune).into_iter().flatten().collect();
        assert_eq!(picks.len(), 10_000);
        let rate = picks.iter().filter(|p| p.variant.is_some()).count() as f64 / 10_000.0;
        assert!((0.28..=0.32).contains(&rate), "rate {rate}");
    }

    #[test]
    fn captions_are_sampled_uniformly_per_appearance() {
        let set = toy_set(50, 5, 0);
        let c = TrainConfig { batch_size: 50, pretrain_epochs: 40, ..cfg() };
        let mut counts = [0usize; 5];
        for p in batch_stream(&set, &c, Phase::Pretrain).into_iter().flatten() {
            counts[p.caption] += 1;
        }
        assert!(counts.iter().all(|&k| (340..=460).contains(&k)), "{counts:?}");
    }

    #[test]
    fn strict_finetune_requires_variants() {
        let set = toy_set(10, 5, 0);
        let mut state = ModelState::init(6, 5, &cfg());
        let strict = TrainConfig { strict: true, ..cfg() };
        assert!(matches!(
            train(&mut state, &set, &strict, Phase::Finetune),
            Err(SpaceError::MissingAugmentation { caption: 0, .. })
        ));
        // Lenient mode uses the original captions.
        let log = train(&mut state, &set, &cfg(), Phase::Finetune).unwrap();
        assert_eq!(log.len(), 3);
    }

    #[test]
    fn zero_epochs_leave_the_initialization() {
        let set = toy_set(10, 1, 0);
        let c = TrainConfig { pretrain_epochs: 0, ..cfg() };
        let mut state = ModelState::init(6, 5, &c);
        let init = state.clone();
        assert!(train(&mut state, &set, &c, Phase::Pretrain).unwrap().is_empty());
        assert_eq!(state, init);
    }

    #[test]
    fn replay_is_bitwise_identical_and_lr_follows_the_schedule() {
        let set = toy_set(24, 5, 5);
        let c = TrainConfig { lr_max: 1e-2, ..cfg() };
        let run = || {
            let mut s = ModelState::<f64>::init(6, 5, &c);
            let mut log = train(&mut s, &set, &c, Phase::Pretrain).unwrap();
            log.extend(train(&mut s, &set, &c, Phase::Finetune).unwrap());
            (s, log)
        };
        let (s1, l1) = run();
        let (s2, l2) = run();
        assert_eq!(s1, s2);
        let bits = |l: &[StepLog]| l.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&l1), bits(&l2));
        // 3 batches per epoch: warmup ends at step 3, pretraining at step 9.
        assert_eq!(l1[2].lr, 1e-2);
        assert_eq!(l1[8].lr, c.lr_min);
        // Fine-tuning has no warmup: it starts just below its peak and decays.
        assert!(l1[9].lr < c.finetune_lr_max && l1[9].lr > l1[10].lr);
        assert_eq!(l1[17].lr, c.lr_min);
        assert_eq!(l1.last().unwrap().step, 18);
    }

    #[test]
    fn config_validation_and_fingerprint() {
        assert!(TrainConfig { swap_prob: 1.5, ..cfg() }.validate().is_err());
        assert!(TrainConfig { temperature: 0.0, ..cfg() }.validate().is_err());
        assert!(TrainConfig { lr_min: 1.0, ..cfg() }.validate().is_err());
        assert_eq!(cfg().fingerprint(), cfg().fingerprint());
        assert_ne!(cfg().fingerprint(), TrainConfig { seed: 6, ..cfg() }.fingerprint());
    }
}
