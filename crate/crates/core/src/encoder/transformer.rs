use rand::Rng;

use super::EncoderError;
use crate::seed::Rng as SeededRng;
use crate::Scalar;

/// Size and seed of a toy frozen encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderParams {
    pub seed: u64,
    pub depth: usize,
    pub width: usize,
    pub heads: usize,
}

impl Default for EncoderParams {
    fn default() -> Self {
        Self { seed: 0, depth: 2, width: 64, heads: 4 }
    }
}

impl EncoderParams {
    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.width == 0 || self.heads == 0 || self.width % self.heads != 0 {
            return Err(EncoderError::InvalidParams(format!(
                "width {} not divisible by heads {}",
                self.width, self.heads
            )));
        }
        if self.width % 4 != 0 {
            return Err(EncoderError::InvalidParams(format!("width {} must be a multiple of 4", self.width)));
        }
        Ok(())
    }
}

pub(crate) fn uniform<T: Scalar>(rng: &mut SeededRng, n: usize, bound: f64) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.gen_range(-bound..bound))).collect()
}

#[derive(Debug, Clone)]
pub(crate) struct Linear<T> {
    w: Vec<T>,
    b: Vec<T>,
    d_in: usize,
    d_out: usize,
}

impl<T: Scalar> Linear<T> {
    pub(crate) fn init(rng: &mut SeededRng, d_in: usize, d_out: usize) -> Self {
        let bound = 1.0 / (d_in as f64).sqrt();
        Self { w: uniform(rng, d_in * d_out, bound), b: uniform(rng, d_out, bound), d_in, d_out }
    }

    /// Applies the layer to each of the `x.len() / d_in` rows of `x`.
    pub(crate) fn forward_rows(&self, x: &[T]) -> Vec<T> {
        let n = x.len() / self.d_in;
        let mut out = Vec::with_capacity(n * self.d_out);
        for row in x.chunks_exact(self.d_in) {
            for (w_row, &b) in self.w.chunks_exact(self.d_in).zip(&self.b) {
                out.push(crate::scalar::dot(w_row, row) + b);
            }
        }
        out
    }
}

/// Parameter-free layer norm (unit gain, zero shift).
pub(crate) fn layer_norm<T: Scalar>(x: &[T], width: usize) -> Vec<T> {
    let eps = T::lit(1e-5);
    let inv_w = T::one() / T::lit(width as f64);
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks_exact(width) {
        let mean = row.iter().copied().sum::<T>() * inv_w;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_w;
        let inv = T::one() / (var + eps).sqrt();
        out.extend(row.iter().map(|&v| (v - mean) * inv));
    }
    out
}

fn gelu<T: Scalar>(x: T) -> T {
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    T::lit(0.5) * x * (T::one() + (c * (x + T::lit(0.044715) * x * x * x)).tanh())
}

/// Standard sinusoidal code of `pos`, written into `out` (even length).
pub(crate) fn sinusoid<T: Scalar>(pos: usize, out: &mut [T]) {
    let dims = out.len();
    for i in 0..dims / 2 {
        let freq = 1.0 / 10_000f64.powf(2.0 * i as f64 / dims as f64);
        let angle = pos as f64 * freq;
        out[2 * i] = T::lit(angle.sin());
        out[2 * i + 1] = T::lit(angle.cos());
    }
}

#[derive(Debug, Clone)]
struct Block<T> {
    qkv: Linear<T>,
    proj: Linear<T>,
    fc1: Linear<T>,
    fc2: Linear<T>,
}

/// Stack of pre-norm self-attention blocks with a final layer norm.
#[derive(Debug, Clone)]
pub(crate) struct Transformer<T> {
    blocks: Vec<Block<T>>,
    width: usize,
    heads: usize,
}

impl<T: Scalar> Transformer<T> {
    pub(crate) fn init(rng: &mut SeededRng, p: &EncoderParams) -> Self {
        let w = p.width;
        let blocks = (0..p.depth)
            .map(|_| Block {
                qkv: Linear::init(rng, w, 3 * w),
                proj: Linear::init(rng, w, w),
                fc1: Linear::init(rng, w, 2 * w),
                fc2: Linear::init(rng, 2 * w, w),
            })
            .collect();
        Self { blocks, width: w, heads: p.heads }
    }

    /// Runs `x` (n rows of `width`) through every block in place and applies
    /// the final layer norm.
    pub(crate) fn forward(&self, x: &mut Vec<T>) {
        for block in &self.blocks {
            let attn = self.attention(block, &layer_norm(x, self.width));
            for (v, a) in x.iter_mut().zip(attn) {
                *v += a;
            }
            let hidden: Vec<T> = block.fc1.forward_rows(&layer_norm(x, self.width)).into_iter().map(gelu).collect();
            for (v, m) in x.iter_mut().zip(block.fc2.forward_rows(&hidden)) {
                *v += m;
            }
        }
        *x = layer_norm(x, self.width);
    }

    fn attention(&self, block: &Block<T>, x: &[T]) -> Vec<T> {
        let w = self.width;
        let n = x.len() / w;
        let dh = w / self.heads;
        let qkv = block.qkv.forward_rows(x);
        let scale = T::one() / T::lit(dh as f64).sqrt();
        let mut mixed = vec![T::zero(); n * w];
        let mut scores = vec![T::zero(); n];
        for h in 0..self.heads {
            let off = h * dh;
            for i in 0..n {
                let q = &qkv[i * 3 * w + off..i * 3 * w + off + dh];
                let mut max = T::neg_infinity();
                for (j, s) in scores.iter_mut().enumerate() {
                    let k = &qkv[j * 3 * w + w + off..j * 3 * w + w + off + dh];
                    *s = crate::scalar::dot(q, k) * scale;
                    max = max.max(*s);
                }
                let mut total = T::zero();
                for s in scores.iter_mut() {
                    *s = (*s - max).exp();
                    total += *s;
                }
                let out = &mut mixed[i * w + off..i * w + off + dh];
                for (j, &s) in scores.iter().enumerate() {
                    let p = s / total;
                    let v = &qkv[j * 3 * w + 2 * w + off..j * 3 * w + 2 * w + off + dh];
                    for (o, &vv) in out.iter_mut().zip(v) {
                        *o += p * vv;
                    }
                }
            }
        }
        block.proj.forward_rows(&mixed)
    }
}
