use super::loss::nt_xent_with_grad;
use super::similarity::{cosine_from_units, normalize_all};
use super::{LossValue, ProjectionHead, SpaceError};
use crate::Scalar;

/// Loss of one batch and the gradients of both heads, each laid out like
/// [`ProjectionHead::params`] (weight then bias).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradients<T> {
    pub loss: LossValue<T>,
    pub audio: Vec<T>,
    pub text: Vec<T>,
}

/// Backpropagates the contrastive loss through cosine normalization and the
/// two linear heads.
///
/// With `a_i = W x_i + b`, `â_i = a_i / |a_i|` and `G = dL/dC`:
/// `dL/dâ_i = sum_j G_ij t̂_j`, `dL/da_i = (g - â_i (â_i · g)) / |a_i|`,
/// `dL/dW = sum_i dL/da_i x_iᵀ`, `dL/db = sum_i dL/da_i`. The text side is
/// the same with `Gᵀ`.
pub fn loss_gradients<T: Scalar>(
    audio_raw: &[Vec<T>],
    text_raw: &[Vec<T>],
    audio_head: &ProjectionHead<T>,
    text_head: &ProjectionHead<T>,
    temperature: T,
) -> Result<BatchGradients<T>, SpaceError> {
    let n = audio_raw.len();
    if n == 0 {
        return Err(SpaceError::EmptyBatch);
    }
    if text_raw.len() != n {
        return Err(SpaceError::DimMismatch { expected: n, found: text_raw.len() });
    }
    if audio_head.d_out() != text_head.d_out() {
        return Err(SpaceError::DimMismatch { expected: audio_head.d_out(), found: text_head.d_out() });
    }
    let a = audio_head.project_batch(audio_raw)?;
    let t = text_head.project_batch(text_raw)?;
    let (au, an) = normalize_all(&a, "audio")?;
    let (tu, tn) = normalize_all(&t, "text")?;
    let c = cosine_from_units(&au, &tu);
    let (loss, g) = nt_xent_with_grad(&c, temperature, true)?;

    let d = audio_head.d_out();
    let mut g_audio_units = vec![vec![T::zero(); d]; n];
    let mut g_text_units = vec![vec![T::zero(); d]; n];
    for i in 0..n {
        for j in 0..n {
            let gij = g[i * n + j];
            for (acc, &x) in g_audio_units[i].iter_mut().zip(&tu[j]) {
                *acc += gij * x;
            }
            for (acc, &x) in g_text_units[j].iter_mut().zip(&au[i]) {
                *acc += gij * x;
            }
        }
    }

    Ok(BatchGradients {
        loss,
        audio: head_gradient(audio_head, audio_raw, &au, &an, &g_audio_units),
        text: head_gradient(text_head, text_raw, &tu, &tn, &g_text_units),
    })
}

fn head_gradient<T: Scalar>(
    head: &ProjectionHead<T>,
    inputs: &[Vec<T>],
    units: &[Vec<T>],
    norms: &[T],
    g_units: &[Vec<T>],
) -> Vec<T> {
    let (d_in, d_out) = (head.d_in(), head.d_out());
    let mut grad = vec![T::zero(); d_out * d_in + d_out];
    let (gw, gb) = grad.split_at_mut(d_out * d_in);
    for (((x, u), &norm), gu) in inputs.iter().zip(units).zip(norms).zip(g_units) {
        let radial = crate::scalar::dot(u, gu);
        for k in 0..d_out {
            let ga = (gu[k] - u[k] * radial) / norm;
            gb[k] += ga;
            for (w, &xv) in gw[k * d_in..(k + 1) * d_in].iter_mut().zip(x) {
                *w += ga * xv;
            }
        }
    }
    grad
}
