//! Waveform to log-mel spectrogram conversion and length handling.

mod length;
mod mel;

pub use length::{pad, pad_batch, segment, snippet_or_pad};
pub use mel::{hz_to_mel, logmel, mel_to_hz, LogMelConfig, MelFilterbank};

use crate::Scalar;

pub const MEL_BINS: usize = 128;
pub const SAMPLE_RATE: u32 = 32_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DspError {
    #[error("waveform has {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("sample rate {found} Hz, expected {expected} Hz (resample upstream)")]
    WrongSampleRate { found: u32, expected: u32 },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("{values} values do not form {frames} frames of {bins} bins")]
    BadShape { frames: usize, bins: usize, values: usize },
    #[error("whitening std must be positive and finite, got {0}")]
    InvalidStats(f64),
    #[error("cannot pad {len} samples down to {target}")]
    PadTooShort { len: usize, target: usize },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

/// Mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Scalar> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self::new(self.samples.iter().map(|&s| s * factor).collect(), self.sample_rate)
    }
}

/// Log-mel energies laid out frame-major: `values[frame * 128 + bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    frames: usize,
    values: Vec<T>,
}

impl<T: Scalar> Spectrogram<T> {
    pub fn from_values(frames: usize, values: Vec<T>) -> Result<Self, DspError> {
        if frames == 0 || values.len() != frames * MEL_BINS {
            return Err(DspError::BadShape { frames, bins: MEL_BINS, values: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DspError::NonFinite);
        }
        Ok(Self { frames, values })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        MEL_BINS
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, frame: usize, bin: usize) -> T {
        self.values[frame * MEL_BINS + bin]
    }

    pub fn frame(&self, frame: usize) -> &[T] {
        &self.values[frame * MEL_BINS..(frame + 1) * MEL_BINS]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { frames: self.frames, values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

/// Global mean and standard deviation used to whiten spectrograms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiteningStats {
    mean: f64,
    std: f64,
}

impl WhiteningStats {
    pub fn new(mean: f64, std: f64) -> Result<Self, DspError> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(DspError::InvalidStats(std));
        }
        if !mean.is_finite() {
            return Err(DspError::NonFinite);
        }
        Ok(Self { mean, std })
    }

    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    /// Mean and population std over every cell of every spectrogram.
    pub fn estimate<'a, T: Scalar>(
        spectrograms: impl IntoIterator<Item = &'a Spectrogram<T>>,
    ) -> Result<Self, DspError> {
        let mut acc = StatsAccumulator::default();
        for s in spectrograms {
            acc.push(s);
        }
        acc.finish()
    }
}

/// Streaming accumulator behind [`WhiteningStats::estimate`]. Uses Welford
/// updates so a whole training split can be fed one clip at a time.
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl StatsAccumulator {
    pub fn push<T: Scalar>(&mut self, s: &Spectrogram<T>) {
        for &v in s.values() {
            let v = v.to_f64_lossy();
            self.count += 1;
            let delta = v - self.mean;
            self.mean += delta / self.count as f64;
            self.m2 += delta * (v - self.mean);
        }
    }

    pub fn finish(&self) -> Result<WhiteningStats, DspError> {
        if self.count == 0 {
            return Err(DspError::NonPositive("cell count"));
        }
        WhiteningStats::new(self.mean, (self.m2 / self.count as f64).sqrt())
    }
}

/// `(value - mean) / std` cell by cell.
pub fn whiten<T: Scalar>(s: &Spectrogram<T>, stats: &WhiteningStats) -> Spectrogram<T> {
    let mean = T::lit(stats.mean);
    let std = T::lit(stats.std);
    s.map(|v| (v - mean) / std)
}
