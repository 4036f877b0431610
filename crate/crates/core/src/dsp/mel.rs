use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{DspError, Spectrogram, Waveform, MEL_BINS, SAMPLE_RATE};
use crate::Scalar;

/// Short-time analysis parameters. Frames are not centered: a waveform of
/// `L >= n_fft` samples yields `1 + (L - n_fft) / hop` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Mel energies below this are clamped before the natural log.
    pub log_floor: f64,
}

impl Default for LogMelConfig {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            n_fft: 1024,
            hop: 320,
            f_min: 0.0,
            f_max: SAMPLE_RATE as f64 / 2.0,
            log_floor: 1e-10,
        }
    }
}

impl LogMelConfig {
    pub fn frame_count(&self, len: usize) -> Option<usize> {
        (len >= self.n_fft).then(|| 1 + (len - self.n_fft) / self.hop)
    }

    /// Frames covering `seconds` of audio at the hop rate.
    pub fn frames_for_seconds(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate as f64 / self.hop as f64).round() as usize
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with unit peak, equally spaced on the mel scale.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// Per filter: index of the first nonzero FFT bin and its weights.
    filters: Vec<(usize, Vec<f64>)>,
    centers_hz: Vec<f64>,
    n_freqs: usize,
}

impl MelFilterbank {
    pub fn new(cfg: &LogMelConfig) -> Self {
        let n_freqs = cfg.n_fft / 2 + 1;
        let bin_hz = cfg.sample_rate as f64 / cfg.n_fft as f64;
        let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
        let edges: Vec<f64> = (0..MEL_BINS + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (MEL_BINS + 1) as f64))
            .collect();

        let filters = edges
            .windows(3)
            .map(|w| {
                let (left, center, right) = (w[0], w[1], w[2]);
                let weights: Vec<(usize, f64)> = (0..n_freqs)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let up = (f - left) / (center - left);
                        let down = (right - f) / (right - center);
                        let wgt = up.min(down);
                        (wgt > 0.0).then_some((k, wgt))
                    })
                    .collect();
                match weights.first() {
                    Some(&(start, _)) => (start, weights.into_iter().map(|(_, w)| w).collect()),
                    None => (0, Vec::new()),
                }
            })
            .collect();
        Self { filters, centers_hz: edges[1..=MEL_BINS].to_vec(), n_freqs }
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn n_freqs(&self) -> usize {
        self.n_freqs
    }

    /// Dense weight of filter `m` at FFT bin `k`.
    pub fn weight(&self, m: usize, k: usize) -> f64 {
        let (start, w) = &self.filters[m];
        if k < *start {
            0.0
        } else {
            w.get(k - start).copied().unwrap_or(0.0)
        }
    }

    fn apply<T: Scalar>(&self, power: &[T], out: &mut [T]) {
        for (o, (start, w)) in out.iter_mut().zip(&self.filters) {
            let mut acc = T::zero();
            for (p, &wgt) in power[*start..].iter().zip(w) {
                acc += *p * T::lit(wgt);
            }
            *o = acc;
        }
    }
}

/// Log-mel spectrogram: periodic Hann window, power spectrum, 128 mel
/// filters from `f_min` to `f_max`, natural log with a floor.
pub fn logmel<T: Scalar>(w: &Waveform<T>, cfg: &LogMelConfig) -> Result<Spectrogram<T>, DspError> {
    if w.sample_rate() != cfg.sample_rate {
        return Err(DspError::WrongSampleRate { found: w.sample_rate(), expected: cfg.sample_rate });
    }
    let frames = cfg
        .frame_count(w.len())
        .ok_or(DspError::TooShort { len: w.len(), min: cfg.n_fft })?;
    if w.samples().iter().any(|s| !s.is_finite()) {
        return Err(DspError::NonFinite);
    }

    let n = cfg.n_fft;
    let window: Vec<T> = (0..n)
        .map(|i| T::lit(0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect();
    let bank = MelFilterbank::new(cfg);
    let fft = FftPlanner::<T>::new().plan_fft_forward(n);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
    let mut power = vec![T::zero(); bank.n_freqs()];
    let floor = T::lit(cfg.log_floor);

    let mut values = vec![T::zero(); frames * MEL_BINS];
    for (f, row) in values.chunks_exact_mut(MEL_BINS).enumerate() {
        let start = f * cfg.hop;
        for ((b, &s), &win) in buf.iter_mut().zip(&w.samples()[start..start + n]).zip(&window) {
            *b = Complex::new(s * win, T::zero());
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        bank.apply(&power, row);
        for v in row.iter_mut() {
            *v = v.max(floor).ln();
        }
    }
    Spectrogram::from_values(frames, values)
}
