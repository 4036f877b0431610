use super::SpaceError;
use crate::scalar::{dot_lanes, l2_norm};
use crate::Scalar;

/// `C[i][j]` = cosine between audio `i` and caption `j`; matching pairs on
/// the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    /// Wraps raw values (row-major). Entries are not restricted to [-1, 1]
    /// here so the loss can be probed with arbitrary logits.
    pub fn from_values(rows: usize, cols: usize, values: Vec<T>) -> Result<Self, SpaceError> {
        if values.len() != rows * cols {
            return Err(SpaceError::DimMismatch { expected: rows * cols, found: values.len() });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn square(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let values = (0..n * n).map(|k| f(k / n, k % n)).collect();
        Self { rows: n, cols: n, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Unit-normalizes every vector, failing on zero norms.
pub(crate) fn normalize_all<T: Scalar>(
    batch: &[Vec<T>],
    side: &'static str,
) -> Result<(Vec<Vec<T>>, Vec<T>), SpaceError> {
    let mut units = Vec::with_capacity(batch.len());
    let mut norms = Vec::with_capacity(batch.len());
    for (index, v) in batch.iter().enumerate() {
        let n = l2_norm(v);
        if !(n > T::zero()) || !n.is_finite() {
            return Err(SpaceError::ZeroNormVector { side, index });
        }
        units.push(v.iter().map(|&x| x / n).collect());
        norms.push(n);
    }
    Ok((units, norms))
}

pub(crate) fn cosine_from_units<T: Scalar>(audio: &[Vec<T>], text: &[Vec<T>]) -> SimilarityMatrix<T> {
    let n = audio.len();
    let m = text.len();
    let mut values = Vec::with_capacity(n * m);
    for a in audio {
        for t in text {
            values.push(dot_lanes(a, t));
        }
    }
    SimilarityMatrix { rows: n, cols: m, values }
}

/// Normalized dot products between projected audio and text vectors.
pub fn similarity_matrix<T: Scalar>(audio: &[Vec<T>], text: &[Vec<T>]) -> Result<SimilarityMatrix<T>, SpaceError> {
    if audio.is_empty() || text.is_empty() {
        return Err(SpaceError::EmptyBatch);
    }
    let dim = audio[0].len();
    if let Some(bad) = audio.iter().chain(text).find(|v| v.len() != dim) {
        return Err(SpaceError::DimMismatch { expected: dim, found: bad.len() });
    }
    let (au, _) = normalize_all(audio, "audio")?;
    let (tu, _) = normalize_all(text, "text")?;
    Ok(cosine_from_units(&au, &tu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_batch(rng: &mut impl Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn orthogonal_pairs_give_identity() {
        let basis: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| if i == j { 3.0 } else { 0.0 }).collect()).collect();
        let c = similarity_matrix(&basis, &basis).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn rescaling_a_vector_leaves_the_matrix_unchanged() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = random_batch(&mut rng, 5, 6);
        let t = random_batch(&mut rng, 5, 6);
        let base = similarity_matrix(&a, &t).unwrap();
        let mut a2 = a.clone();
        a2[2].iter_mut().for_each(|x| *x *= 17.5);
        let mut t2 = t.clone();
        t2[0].iter_mut().for_each(|x| *x *= 0.003);
        let scaled = similarity_matrix(&a2, &t2).unwrap();
        for (x, y) in base.values().iter().zip(scaled.values()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn matches_scalar_loop_cosine() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let a = random_batch(&mut rng, 5, 9);
        let t = random_batch(&mut rng, 5, 9);
        let c = similarity_matrix(&a, &t).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
                for k in 0..9 {
                    ab += a[i][k] * t[j][k];
                    aa += a[i][k] * a[i][k];
                    bb += t[j][k] * t[j][k];
                }
                let expected: f64 = ab / (aa.sqrt() * bb.sqrt());
                assert!((c.get(i, j) - expected).abs() < 1e-6);
                assert!(c.get(i, j).abs() <= 1.0 + 1e-6);
            }
        }
    }

    #[test]
    fn zero_vectors_are_rejected() {
        let a = vec![vec![1.0f32, 0.0], vec![0.0, 0.0]];
        assert_eq!(
            similarity_matrix(&a, &a),
            Err(SpaceError::ZeroNormVector { side: "audio", index: 1 })
        );
    }
}
