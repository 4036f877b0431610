use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;

use super::patch::{extract_patches, structured_patchout, PatchGeometry, PatchGrid};
use super::transformer::{sinusoid, EncoderParams, Linear, Transformer};
use super::EncoderError;
use crate::dsp::{segment, Spectrogram};
use crate::Scalar;

/// Frozen toy spectrogram transformer.
///
/// Each patch is linearly projected, a 2-D sinusoidal code of its `(row,
/// col)` tag is added (first half of the width encodes the row, second half
/// the column), and the token set runs through pre-norm attention blocks
/// before mean pooling. Position comes only from tags, so the output does
/// not depend on the order of the patch list.
#[derive(Debug)]
pub struct AudioEncoder<T> {
    params: EncoderParams,
    patch_dim: usize,
    patch_proj: Linear<T>,
    body: Transformer<T>,
    calls: AtomicUsize,
}

impl<T: Scalar> AudioEncoder<T> {
    pub fn new(params: EncoderParams, patch_dim: usize) -> Result<Self, EncoderError> {
        params.validate()?;
        let mut rng = crate::seed::rng_for(params.seed, "audio-encoder");
        let patch_proj = Linear::init(&mut rng, patch_dim, params.width);
        let body = Transformer::init(&mut rng, &params);
        Ok(Self { params, patch_dim, patch_proj, body, calls: AtomicUsize::new(0) })
    }

    pub fn params(&self) -> &EncoderParams {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.params.width
    }

    /// Number of grids encoded so far.
    pub fn encode_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn encode(&self, grid: &PatchGrid<T>) -> Result<Vec<T>, EncoderError> {
        if grid.is_empty() {
            return Err(EncoderError::EmptyGrid);
        }
        if grid.patch_dim() != self.patch_dim {
            return Err(EncoderError::DimMismatch { expected: self.patch_dim, found: grid.patch_dim() });
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let w = self.params.width;
        let flat: Vec<T> = grid.iter().flat_map(|(_, p)| p.iter().copied()).collect();
        let mut tokens = self.patch_proj.forward_rows(&flat);
        let mut code = vec![T::zero(); w / 2];
        for (tok, &(r, c)) in tokens.chunks_exact_mut(w).zip(grid.tags()) {
            sinusoid(r, &mut code);
            for (t, &p) in tok[..w / 2].iter_mut().zip(&code) {
                *t += p;
            }
            sinusoid(c, &mut code);
            for (t, &p) in tok[w / 2..].iter_mut().zip(&code) {
                *t += p;
            }
        }
        self.body.forward(&mut tokens);

        let n = T::lit(grid.len() as f64);
        let mut pooled = vec![T::zero(); w];
        for tok in tokens.chunks_exact(w) {
            for (p, &t) in pooled.iter_mut().zip(tok) {
                *p += t;
            }
        }
        pooled.iter_mut().for_each(|p| *p /= n);
        Ok(pooled)
    }

    /// Full clip pipeline: split into `seg_frames` segments, patchify each,
    /// apply structured patchout when a training generator is supplied, and
    /// average the segment embeddings.
    pub fn embed_spectrogram<R: Rng + ?Sized>(
        &self,
        s: &Spectrogram<T>,
        geometry: &PatchGeometry,
        seg_frames: usize,
        training: Option<&mut R>,
    ) -> Result<Vec<T>, EncoderError> {
        let segments = segment(s, seg_frames).map_err(|e| EncoderError::InvalidParams(e.to_string()))?;
        let mut grids = segments
            .iter()
            .map(|seg| extract_patches(seg, geometry))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(rng) = training {
            for g in grids.iter_mut() {
                *g = structured_patchout(g, geometry.drop_f, geometry.drop_t, rng)?;
            }
        }
        embed_long_audio(&grids, self)
    }
}

/// Arithmetic mean of the per-segment embeddings.
pub fn embed_long_audio<T: Scalar>(segments: &[PatchGrid<T>], encoder: &AudioEncoder<T>) -> Result<Vec<T>, EncoderError> {
    let mut sum: Option<Vec<T>> = None;
    for seg in segments {
        let e = encoder.encode(seg)?;
        match sum.as_mut() {
            None => sum = Some(e),
            Some(acc) => acc.iter_mut().zip(e).for_each(|(a, v)| *a += v),
        }
    }
    let mut sum = sum.ok_or(EncoderError::NoSegments)?;
    let n = T::lit(segments.len() as f64);
    sum.iter_mut().for_each(|v| *v /= n);
    Ok(sum)
}
