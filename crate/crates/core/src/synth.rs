//! Synthetic data: paired audio/text embeddings drawn as two noisy random
//! linear views of shared latents, unrelated pairs, and test tones.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::{Waveform, SAMPLE_RATE};
use crate::retrieval::{EvalSet, Query};
use crate::seed::rng_for;
use crate::space::{CaptionEmbeddings, ClipEmbeddings, TrainingSet};
use crate::Scalar;

/// `audio = A z + e_a`, `text = B z + e_t` with `z ~ N(0, I)`, fixed random
/// mixing matrices and Gaussian noise of standard deviation `noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPairModel {
    latent_dim: usize,
    audio_dim: usize,
    text_dim: usize,
    noise: f64,
    audio_mix: Vec<f64>,
    text_mix: Vec<f64>,
}

impl LatentPairModel {
    pub fn new(latent_dim: usize, audio_dim: usize, text_dim: usize, noise: f64, seed: u64) -> Self {
        let mut rng = rng_for(seed, "synth-mixing");
        let scale = 1.0 / (latent_dim as f64).sqrt();
        let mut mix = |rows: usize| -> Vec<f64> {
            (0..rows * latent_dim).map(|_| { let x: f64 = StandardNormal.sample(&mut rng); scale * x }).collect::<Vec<f64>>()
        };
        let audio_mix = mix(audio_dim);
        let text_mix = mix(text_dim);
        Self { latent_dim, audio_dim, text_dim, noise, audio_mix, text_mix }
    }

    /// The configuration used by the end-to-end checks: 32 latents, noise 0.05.
    pub fn standard(seed: u64) -> Self {
        Self::new(32, 64, 48, 0.05, seed)
    }

    pub fn audio_dim(&self) -> usize {
        self.audio_dim
    }

    pub fn text_dim(&self) -> usize {
        self.text_dim
    }

    fn view<T: Scalar, R: Rng>(&self, mix: &[f64], z: &[f64], rng: &mut R) -> Vec<T> {
        mix.chunks_exact(self.latent_dim)
            .map(|row| {
                let clean: f64 = row.iter().zip(z).map(|(a, b)| a * b).sum();
                let e: f64 = StandardNormal.sample(rng);
                T::lit(clean + self.noise * e)
            })
            .collect()
    }

    /// `n` paired views; `tag` selects an independent latent stream.
    pub fn sample<T: Scalar>(&self, n: usize, seed: u64, tag: &str) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        let mut rng = rng_for(seed, tag);
        let mut audio = Vec::with_capacity(n);
        let mut text = Vec::with_capacity(n);
        for _ in 0..n {
            let z: Vec<f64> = (0..self.latent_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            audio.push(self.view(&self.audio_mix, &z, &mut rng));
            text.push(self.view(&self.text_mix, &z, &mut rng));
        }
        (audio, text)
    }

    pub fn training_set<T: Scalar>(&self, n: usize, seed: u64, tag: &str) -> TrainingSet<T> {
        let (audio, text) = self.sample(n, seed, tag);
        let ids = (0..n).map(|i| format!("{tag}-{i:05}")).collect();
        TrainingSet::from_pairs(ids, audio, text).expect("generated pairs are consistent")
    }

    pub fn eval_set<T: Scalar>(&self, n: usize, seed: u64, tag: &str) -> EvalSet<T> {
        let (audio, text) = self.sample(n, seed, tag);
        pairs_to_eval(tag, audio, text)
    }
}

fn pairs_to_eval<T>(tag: &str, audio: Vec<Vec<T>>, text: Vec<Vec<T>>) -> EvalSet<T> {
    let audio_ids: Vec<String> = (0..audio.len()).map(|i| format!("{tag}-{i:05}")).collect();
    let queries = text
        .into_iter()
        .zip(&audio_ids)
        .map(|(vector, id)| Query { id: format!("{id}#0"), target: id.clone(), vector })
        .collect();
    EvalSet { audio_ids, audio, queries }
}

/// Audio and text drawn independently, so no pairing signal exists.
pub fn unrelated_eval_set<T: Scalar>(n: usize, audio_dim: usize, text_dim: usize, seed: u64) -> EvalSet<T> {
    let mut rng = rng_for(seed, "synth-unrelated");
    let mut draw = |d: usize| -> Vec<T> { (0..d).map(|_| T::lit(StandardNormal.sample(&mut rng))).collect() };
    let audio = (0..n).map(|_| draw(audio_dim)).collect();
    let text = (0..n).map(|_| draw(text_dim)).collect();
    pairs_to_eval("unrelated", audio, text)
}

/// Training clips carrying five captions, each with `variants` rephrasings,
/// all drawn from the latent model around the clip's latent.
pub fn clips_with_variants<T: Scalar>(
    model: &LatentPairModel,
    n: usize,
    variants: usize,
    seed: u64,
) -> TrainingSet<T> {
    let mut rng = rng_for(seed, "synth-variants");
    let clips = (0..n)
        .map(|i| {
            let z: Vec<f64> = (0..model.latent_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let audio = model.view(&model.audio_mix, &z, &mut rng);
            let captions = (0..5)
                .map(|_| CaptionEmbeddings {
                    text: model.view(&model.text_mix, &z, &mut rng),
                    variants: (0..variants).map(|_| model.view(&model.text_mix, &z, &mut rng)).collect(),
                })
                .collect();
            ClipEmbeddings { id: format!("clip-{i:05}"), audio_views: vec![audio], captions }
        })
        .collect();
    TrainingSet::new(clips).expect("generated clips are consistent")
}

/// A sine at `freq_hz` with peak `amplitude`, sampled at the model rate.
pub fn tone<T: Scalar>(freq_hz: f64, seconds: f64, amplitude: f64) -> Waveform<T> {
    let sr = f64::from(SAMPLE_RATE);
    let n = (seconds * sr).round() as usize;
    let samples = (0..n)
        .map(|i| T::lit(amplitude * (2.0 * std::f64::consts::PI * freq_hz * i as f64 / sr).sin()))
        .collect();
    Waveform::new(samples, SAMPLE_RATE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn views_share_latents() {
        let m = LatentPairModel::standard(1);
        let (a, t) = m.sample::<f64>(3, 2, "x");
        assert_eq!((a.len(), a[0].len(), t[0].len()), (3, 64, 48));
        let (a2, _) = m.sample::<f64>(3, 2, "x");
        assert_eq!(a, a2);
        let (a3, _) = m.sample::<f64>(3, 2, "y");
        assert_ne!(a, a3);
    }

    #[test]
    fn tone_has_expected_length_and_peak() {
        let w = tone::<f32>(1000.0, 0.5, 0.8);
        assert_eq!(w.len(), 16_000);
        let peak = w.samples().iter().fold(0.0f32, |m, x| m.max(x.abs()));
        assert!((peak - 0.8).abs() < 1e-3);
    }

    #[test]
    fn variant_clips_shape() {
        let set = clips_with_variants::<f32>(&LatentPairModel::standard(0), 4, 5, 1);
        assert_eq!(set.len(), 4);
        assert!(set.clips().iter().all(|c| c.captions.len() == 5 && c.captions[0].variants.len() == 5));
    }
}
