//! Cross-modal audio-caption retrieval engine.
//!
//! Audio recordings and captions are embedded by frozen encoders, mapped into
//! a shared space by trainable linear heads, aligned with a symmetric
//! contrastive (NT-Xent) objective and ranked by cosine similarity.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the bottom of this file pin the common instantiations.
//!
//! Module map:
//! - [`ingest`]: manifests, augmented captions, WAV decoding, embedding dumps.
//! - [`dsp`]: log-mel spectrograms, whitening, snippets and segmentation.
//! - [`encoder`]: spectrogram patches, structured patchout, toy frozen
//!   audio/text transformers, WordPiece tokenizer.
//! - [`space`]: projection heads, similarity, loss and gradients, Adam,
//!   learning-rate schedule, the training loop and checkpoints.
//! - [`retrieval`]: ranking, mAP@10 / R@k metrics, ablation and
//!   segment-length experiments.

pub mod dsp;
pub mod encoder;
pub mod ingest;
pub mod retrieval;
pub mod scalar;
pub mod seed;
pub mod space;
pub mod synth;

pub use scalar::Scalar;

/// Dimension of the shared audio-caption space.
pub const SHARED_DIM: usize = 1024;

pub type Waveform = dsp::Waveform<f32>;
pub type Spectrogram = dsp::Spectrogram<f32>;
pub type PatchGrid = encoder::PatchGrid<f32>;
pub type AudioEncoder = encoder::AudioEncoder<f32>;
pub type TextEncoder = encoder::TextEncoder<f32>;
pub type ProjectionHead = space::ProjectionHead<f32>;
pub type ProjectionHead64 = space::ProjectionHead<f64>;
pub type SimilarityMatrix = space::SimilarityMatrix<f32>;
pub type SimilarityMatrix64 = space::SimilarityMatrix<f64>;
pub type TrainingSet = space::TrainingSet<f32>;
pub type TrainingSet64 = space::TrainingSet<f64>;
pub type RetrievalIndex = retrieval::RetrievalIndex<f32>;
pub type RetrievalIndex64 = retrieval::RetrievalIndex<f64>;
