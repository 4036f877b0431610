//! Frozen stand-in encoders and their input tokenization.
//!
//! Audio: spectrogram → patch grid (optionally thinned by structured
//! patchout) → small pre-norm transformer → mean-pooled vector.
//! Text: normalize → WordPiece → small transformer → class-token vector.
//! Weights are drawn once from a seed and never trained.

mod audio;
mod patch;
mod text;
mod transformer;

pub use audio::{embed_long_audio, AudioEncoder};
pub use patch::{extract_patches, structured_patchout, PatchGeometry, PatchGrid};
pub use text::{normalize_text, TextEncoder, TokenSeq, Vocab, MAX_CONTENT_TOKENS};
pub use transformer::EncoderParams;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncoderError {
    #[error("spectrogram of {frames} frames x {bins} bins is smaller than a {patch_t}x{patch_f} patch")]
    InputTooShort { frames: usize, bins: usize, patch_f: usize, patch_t: usize },
    #[error("cannot drop {drop_f} rows / {drop_t} columns from a {rows}x{cols} grid")]
    DropExceedsGrid { drop_f: usize, drop_t: usize, rows: usize, cols: usize },
    #[error("patch grid is empty")]
    EmptyGrid,
    #[error("expected input dimension {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid encoder parameters: {0}")]
    InvalidParams(String),
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("no segments to embed")]
    NoSegments,
}
