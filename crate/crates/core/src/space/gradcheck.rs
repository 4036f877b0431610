use rand::Rng;

use super::{loss_gradients, nt_xent_loss, similarity_matrix, ProjectionHead, SpaceError};
use crate::seed::rng_for;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-4;
/// Smallest denominator used for relative errors, so entries that are zero
/// up to rounding compare in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// Outcome of comparing analytic head gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub batch: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub params: usize,
    pub max_rel_error: f64,
    pub max_abs_gradient: f64,
}

/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

fn batch<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn forward(
    a: &[Vec<f64>],
    t: &[Vec<f64>],
    ha: &ProjectionHead<f64>,
    ht: &ProjectionHead<f64>,
    tau: f64,
) -> Result<f64, SpaceError> {
    let c = similarity_matrix(&ha.project_batch(a)?, &ht.project_batch(t)?)?;
    Ok(nt_xent_loss(&c, tau)?.value)
}

/// Checks every weight and bias partial of both heads on a random instance
/// with `n` pairs. `tamper` may alter the analytic gradients before
/// comparison, which lets callers confirm the check can fail.
pub fn gradient_check(
    n: usize,
    d_in: usize,
    d_out: usize,
    seed: u64,
    temperature: f64,
    tamper: Option<&dyn Fn(&mut [f64])>,
) -> Result<GradCheckReport, SpaceError> {
    let mut rng = rng_for(seed, "gradient-check");
    let a = batch(&mut rng, n, d_in);
    let t = batch(&mut rng, n, d_in);
    let ha = ProjectionHead::init(d_in, d_out, &mut rng);
    let ht = ProjectionHead::init(d_in, d_out, &mut rng);
    let mut g = loss_gradients(&a, &t, &ha, &ht, temperature)?;
    if let Some(f) = tamper {
        f(&mut g.audio);
        f(&mut g.text);
    }

    let mut max_rel_error: f64 = 0.0;
    let mut max_abs_gradient: f64 = 0.0;
    for (audio_side, analytic) in [(true, &g.audio), (false, &g.text)] {
        let base = if audio_side { &ha } else { &ht };
        for (k, &value) in analytic.iter().enumerate() {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus.params_mut()[k] += FD_STEP;
            minus.params_mut()[k] -= FD_STEP;
            let (lp, lm) = if audio_side {
                (forward(&a, &t, &plus, &ht, temperature)?, forward(&a, &t, &minus, &ht, temperature)?)
            } else {
                (forward(&a, &t, &ha, &plus, temperature)?, forward(&a, &t, &ha, &minus, temperature)?)
            };
            let numeric = (lp - lm) / (2.0 * FD_STEP);
            max_rel_error = max_rel_error.max(relative_error(value, numeric));
            max_abs_gradient = max_abs_gradient.max(value.abs());
        }
    }
    Ok(GradCheckReport {
        batch: n,
        d_in,
        d_out,
        params: g.audio.len() + g.text.len(),
        max_rel_error,
        max_abs_gradient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shapes_pass() {
        for (n, d_in, d_out) in [(8, 16, 12), (4, 32, 8)] {
            let r = gradient_check(n, d_in, d_out, 1, 1.0, None).unwrap();
            assert!(r.max_rel_error < 1e-4, "{r:?}");
        }
    }

    #[test]
    fn tampering_is_detected() {
        let bump = |g: &mut [f64]| g[3] *= 1.01;
        let r = gradient_check(8, 16, 12, 1, 1.0, Some(&bump)).unwrap();
        assert!(r.max_rel_error > 1e-3);
    }

    #[test]
    fn single_pair_has_zero_gradient() {
        let r = gradient_check(1, 16, 12, 1, 1.0, None).unwrap();
        assert_eq!(r.max_abs_gradient, 0.0);
        assert!(r.max_rel_error < 1e-4);
    }
}
