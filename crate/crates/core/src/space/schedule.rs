/// Learning rate at optimization step `step` of `total_steps`.
///
/// Linear ramp from 0 to `lr_max` over the first `warmup_steps`, then a
/// half-cosine from `lr_max` down to `lr_min` reached at `total_steps`.
/// Steps past the end stay at `lr_min`.
pub fn lr_at(step: u64, total_steps: u64, warmup_steps: u64, lr_max: f64, lr_min: f64) -> f64 {
    if warmup_steps > 0 && step <= warmup_steps {
        return lr_max * step as f64 / warmup_steps as f64;
    }
    if step >= total_steps {
        return if total_steps <= warmup_steps { lr_max } else { lr_min };
    }
    let progress = (step - warmup_steps) as f64 / (total_steps - warmup_steps) as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAX: f64 = 2e-5;
    const MIN: f64 = 1e-7;

    #[test]
    fn landmarks() {
        let (total, warm) = (16 * 60, 60);
        assert_eq!(lr_at(0, total, warm, MAX, MIN), 0.0);
        assert_eq!(lr_at(warm, total, warm, MAX, MIN), MAX);
        assert_eq!(lr_at(total, total, warm, MAX, MIN), MIN);
        assert!((lr_at(30, total, warm, MAX, MIN) - MAX / 2.0).abs() < 1e-18);
        let mid = warm + (total - warm) / 2;
        assert!((lr_at(mid, total, warm, MAX, MIN) - (MAX + MIN) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_warmup_starts_at_the_peak() {
        assert_eq!(lr_at(0, 100, 0, 8e-6, MIN), 8e-6);
        assert_eq!(lr_at(100, 100, 0, 8e-6, MIN), MIN);
    }

    #[test]
    fn monotone_after_warmup() {
        let mut prev = f64::INFINITY;
        for s in 10..=200 {
            let lr = lr_at(s, 200, 10, MAX, MIN);
            assert!(lr <= prev && lr >= MIN);
            prev = lr;
        }
    }
}
