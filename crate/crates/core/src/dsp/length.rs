use rand::Rng;

use super::{DspError, Spectrogram, Waveform, MEL_BINS};
use crate::Scalar;

/// Cuts a uniformly placed snippet of `max_seconds` from longer clips;
/// shorter clips are returned unchanged.
pub fn snippet_or_pad<T: Scalar, R: Rng + ?Sized>(
    w: &Waveform<T>,
    max_seconds: f64,
    rng: &mut R,
) -> Result<Waveform<T>, DspError> {
    if !(max_seconds > 0.0) {
        return Err(DspError::NonPositive("max_seconds"));
    }
    let max_len = (max_seconds * w.sample_rate() as f64).round() as usize;
    if w.len() <= max_len {
        return Ok(w.clone());
    }
    let start = rng.gen_range(0..=w.len() - max_len);
    Ok(Waveform::new(w.samples()[start..start + max_len].to_vec(), w.sample_rate()))
}

/// Zero-pads to exactly `target_len` samples.
pub fn pad<T: Scalar>(w: &Waveform<T>, target_len: usize) -> Result<Waveform<T>, DspError> {
    if target_len < w.len() {
        return Err(DspError::PadTooShort { len: w.len(), target: target_len });
    }
    let mut samples = w.samples().to_vec();
    samples.resize(target_len, T::zero());
    Ok(Waveform::new(samples, w.sample_rate()))
}

/// Pads every waveform to the longest one in the batch.
pub fn pad_batch<T: Scalar>(batch: &[Waveform<T>]) -> Vec<Waveform<T>> {
    let target = batch.iter().map(Waveform::len).max().unwrap_or(0);
    batch
        .iter()
        .map(|w| pad(w, target).expect("target is the batch maximum"))
        .collect()
}

/// Splits into consecutive chunks of `seg_frames`; the last chunk is
/// zero-padded. Yields `ceil(frames / seg_frames)` chunks.
pub fn segment<T: Scalar>(s: &Spectrogram<T>, seg_frames: usize) -> Result<Vec<Spectrogram<T>>, DspError> {
    if seg_frames == 0 {
        return Err(DspError::NonPositive("seg_frames"));
    }
    let chunk = seg_frames * MEL_BINS;
    Ok(s.values()
        .chunks(chunk)
        .map(|c| {
            let mut values = c.to_vec();
            values.resize(chunk, T::zero());
            Spectrogram::from_values(seg_frames, values).expect("shape is seg_frames x 128")
        })
        .collect())
}
