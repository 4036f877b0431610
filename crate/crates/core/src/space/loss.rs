use super::{SimilarityMatrix, SpaceError};
use crate::Scalar;

/// Symmetric contrastive loss and its two directional halves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue<T> {
    /// Mean of the two directions.
    pub value: T,
    /// Column-wise cross-entropy: each caption picks its audio.
    pub text_to_audio: T,
    /// Row-wise cross-entropy: each audio picks its caption.
    pub audio_to_text: T,
}

fn log_sum_exp<T: Scalar>(xs: impl Iterator<Item = T> + Clone) -> T {
    let max = xs.clone().fold(T::neg_infinity(), T::max);
    max + xs.map(|x| (x - max).exp()).sum::<T>().ln()
}

/// Cross-entropy of `softmax(C / temperature)` against the identity target,
/// over rows and over columns, averaged as `(1 / 2N) * sum_i (row_i + col_i)`.
pub fn nt_xent_loss<T: Scalar>(c: &SimilarityMatrix<T>, temperature: T) -> Result<LossValue<T>, SpaceError> {
    nt_xent_with_grad(c, temperature, false).map(|(l, _)| l)
}

/// Loss plus, when requested, `dL/dC` (row-major).
pub(crate) fn nt_xent_with_grad<T: Scalar>(
    c: &SimilarityMatrix<T>,
    temperature: T,
    want_grad: bool,
) -> Result<(LossValue<T>, Vec<T>), SpaceError> {
    let n = c.rows();
    if n != c.cols() {
        return Err(SpaceError::NonSquare { rows: n, cols: c.cols() });
    }
    if n == 0 {
        return Err(SpaceError::EmptyBatch);
    }
    if !(temperature > T::zero()) {
        return Err(SpaceError::InvalidConfig("temperature must be positive".into()));
    }
    let logit = |i: usize, j: usize| c.get(i, j) / temperature;

    let row_lse: Vec<T> = (0..n).map(|i| log_sum_exp((0..n).map(move |j| logit(i, j)))).collect();
    let col_lse: Vec<T> = (0..n).map(|j| log_sum_exp((0..n).map(move |i| logit(i, j)))).collect();

    let nt = T::lit(n as f64);
    let audio_to_text = (0..n).map(|i| row_lse[i] - logit(i, i)).sum::<T>() / nt;
    let text_to_audio = (0..n).map(|j| col_lse[j] - logit(j, j)).sum::<T>() / nt;
    let loss = LossValue {
        value: (audio_to_text + text_to_audio) / T::lit(2.0),
        text_to_audio,
        audio_to_text,
    };

    let mut grad = Vec::new();
    if want_grad {
        let scale = T::one() / (T::lit(2.0) * nt * temperature);
        grad.reserve(n * n);
        for i in 0..n {
            for j in 0..n {
                let l = logit(i, j);
                let p_row = (l - row_lse[i]).exp();
                let p_col = (l - col_lse[j]).exp();
                let target = if i == j { T::lit(2.0) } else { T::zero() };
                grad.push((p_row + p_col - target) * scale);
            }
        }
    }
    Ok((loss, grad))
}
