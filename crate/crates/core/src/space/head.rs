use rand::Rng;

use super::SpaceError;
use crate::Scalar;

/// Affine map `W e + b` into the shared space. Parameters live in one
/// buffer, weight (row-major, `d_out x d_in`) followed by bias, so the
/// optimizer can treat the head as a flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead<T> {
    d_in: usize,
    d_out: usize,
    params: Vec<T>,
}

impl<T: Scalar> ProjectionHead<T> {
    /// Uniform initialization in `±1/sqrt(d_in)` for weight and bias.
    pub fn init<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (d_in as f64).sqrt();
        let params = (0..d_out * d_in + d_out).map(|_| T::lit(rng.gen_range(-bound..bound))).collect();
        Self { d_in, d_out, params }
    }

    pub fn from_parts(d_in: usize, d_out: usize, weight: Vec<T>, bias: Vec<T>) -> Result<Self, SpaceError> {
        if weight.len() != d_in * d_out {
            return Err(SpaceError::DimMismatch { expected: d_in * d_out, found: weight.len() });
        }
        if bias.len() != d_out {
            return Err(SpaceError::DimMismatch { expected: d_out, found: bias.len() });
        }
        let mut params = weight;
        params.extend(bias);
        Ok(Self { d_in, d_out, params })
    }

    pub fn from_params(d_in: usize, d_out: usize, params: Vec<T>) -> Result<Self, SpaceError> {
        if params.len() != d_in * d_out + d_out {
            return Err(SpaceError::DimMismatch { expected: d_in * d_out + d_out, found: params.len() });
        }
        Ok(Self { d_in, d_out, params })
    }

    pub fn identity(dim: usize) -> Self {
        let mut weight = vec![T::zero(); dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = T::one();
        }
        Self::from_parts(dim, dim, weight, vec![T::zero(); dim]).expect("square identity")
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn weight(&self) -> &[T] {
        &self.params[..self.d_in * self.d_out]
    }

    pub fn bias(&self) -> &[T] {
        &self.params[self.d_in * self.d_out..]
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn project(&self, e: &[T]) -> Result<Vec<T>, SpaceError> {
        if e.len() != self.d_in {
            return Err(SpaceError::DimMismatch { expected: self.d_in, found: e.len() });
        }
        Ok(self
            .weight()
            .chunks_exact(self.d_in)
            .zip(self.bias())
            .map(|(row, &b)| crate::scalar::dot_lanes(row, e) + b)
            .collect())
    }

    pub fn project_batch(&self, batch: &[Vec<T>]) -> Result<Vec<Vec<T>>, SpaceError> {
        batch.iter().map(|e| self.project(e)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn identity_weight_zero_bias() {
        let h = ProjectionHead::<f64>::identity(4);
        assert_eq!(h.project(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![1.0, -2.0, 3.0, 0.5]);
    }

    #[test]
    fn zero_weight_returns_bias() {
        let h = ProjectionHead::from_parts(3, 2, vec![0.0f32; 6], vec![0.25, -4.0]).unwrap();
        assert_eq!(h.project(&[9.0, 9.0, 9.0]).unwrap(), vec![0.25, -4.0]);
        assert_eq!(h.project(&[1.0]), Err(SpaceError::DimMismatch { expected: 3, found: 1 }));
    }

    #[test]
    fn random_head_matches_triple_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let h = ProjectionHead::<f64>::init(7, 5, &mut rng);
        let batch: Vec<Vec<f64>> = (0..4).map(|_| (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let got = h.project_batch(&batch).unwrap();
        let (w, b) = (h.weight(), h.bias());
        for (n, x) in batch.iter().enumerate() {
            for i in 0..5 {
                let mut acc = b[i];
                for j in 0..7 {
                    acc += w[i * 7 + j] * x[j];
                }
                assert!((got[n][i] - acc).abs() < 1e-6);
            }
        }
        assert!(h.params().iter().all(|p| p.abs() <= 1.0 / 7f64.sqrt()));
    }
}
