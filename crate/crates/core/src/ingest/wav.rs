use std::path::Path;

use crate::dsp::Waveform;
use crate::Scalar;

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Decodes a RIFF/WAVE file into a mono waveform.
///
/// 16-bit PCM is scaled by `1/32768`, so `-32768` maps to exactly `-1.0`.
/// Channels are averaged. 32-bit float input is clamped to `[-1, 1]`.
pub fn read_wav<T: Scalar>(path: &Path) -> Result<Waveform<T>, IngestError> {
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(IngestError::CorruptHeader {
            path: path.to_path_buf(),
            detail: "zero channels".into(),
        });
    }

    let interleaved: Vec<T> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => {
            let scale = T::lit(32768.0);
            reader
                .into_samples::<i16>()
                .map(|s| s.map(|v| T::lit(v as f64) / scale))
                .collect::<Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        (hound::SampleFormat::Float, 32) => {
            let samples: Vec<f32> = reader
                .into_samples::<f32>()
                .collect::<Result<_, _>>()
                .map_err(|e| map_hound(path, e))?;
            if samples.iter().any(|s| !s.is_finite()) {
                return Err(IngestError::UnsupportedEncoding {
                    path: path.to_path_buf(),
                    detail: "non-finite float samples".into(),
                });
            }
            samples
                .into_iter()
                .map(|s| T::lit(s.clamp(-1.0, 1.0) as f64))
                .collect()
        }
        (format, bits) => {
            return Err(IngestError::UnsupportedEncoding {
                path: path.to_path_buf(),
                detail: format!("{format:?} with {bits} bits per sample"),
            })
        }
    };

    let samples = if channels == 1 {
        interleaved
    } else {
        let n = T::lit(channels as f64);
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().copied().sum::<T>() / n)
            .collect()
    };
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Writes a mono waveform.
pub fn write_wav<T: Scalar>(
    path: &Path,
    wave: &Waveform<T>,
    encoding: WavEncoding,
) -> Result<(), IngestError> {
    let (bits, format) = match encoding {
        WavEncoding::Pcm16 => (16, hound::SampleFormat::Int),
        WavEncoding::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate(),
        bits_per_sample: bits,
        sample_format: format,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in wave.samples() {
        let s = s.to_f64_lossy();
        let res = match encoding {
            WavEncoding::Pcm16 => writer.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16),
            WavEncoding::Float32 => writer.write_sample(s as f32),
        };
        res.map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

fn map_hound(path: &Path, err: hound::Error) -> IngestError {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            IngestError::CorruptHeader { path: path.to_path_buf(), detail: e.to_string() }
        }
        hound::Error::IoError(e) => IngestError::io(path, e),
        hound::Error::FormatError(detail) => IngestError::CorruptHeader {
            path: path.to_path_buf(),
            detail: detail.to_string(),
        },
        hound::Error::Unsupported => IngestError::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: "unsupported WAV feature".into(),
        },
        other => IngestError::CorruptHeader { path: path.to_path_buf(), detail: other.to_string() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw<S: hound::Sample + Copy>(
        channels: u16,
        bits: u16,
        format: hound::SampleFormat,
        frames: &[Vec<S>],
    ) -> tempfile::TempPath {
        let path = tempfile::Builder::new().suffix(".wav").tempfile().unwrap().into_temp_path();
        let spec = hound::WavSpec { channels, sample_rate: 32_000, bits_per_sample: bits, sample_format: format };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for frame in frames {
            for &s in frame {
                w.write_sample(s).unwrap();
            }
        }
        w.finalize().unwrap();
        path
    }

    #[test]
    fn pcm16_one_second_at_32k() {
        let frames: Vec<Vec<i16>> = (0..32_000).map(|i| vec![(i % 200) as i16]).collect();
        let path = write_raw(1, 16, hound::SampleFormat::Int, &frames);
        let w: Waveform<f32> = read_wav(&path).unwrap();
        assert_eq!(w.len(), 32_000);
        assert_eq!(w.sample_rate(), 32_000);
        assert_eq!(w.duration_seconds(), 1.0);
    }

    #[test]
    fn int16_minimum_maps_to_minus_one() {
        let path = write_raw(1, 16, hound::SampleFormat::Int, &[vec![i16::MIN], vec![16384]]);
        let w: Waveform<f64> = read_wav(&path).unwrap();
        assert_eq!(w.samples(), &[-1.0, 0.5]);
    }

    #[test]
    fn antiphase_stereo_mixes_to_silence() {
        let frames: Vec<Vec<f32>> = (0..500).map(|_| vec![0.5, -0.5]).collect();
        let path = write_raw(2, 32, hound::SampleFormat::Float, &frames);
        let w: Waveform<f32> = read_wav(&path).unwrap();
        assert_eq!(w.len(), 500);
        assert!(w.samples().iter().all(|&s| s == 0.0));

        let frames: Vec<Vec<i16>> = (0..500).map(|i| vec![i as i16 * 37, -(i as i16 * 37)]).collect();
        let path = write_raw(2, 16, hound::SampleFormat::Int, &frames);
        let w: Waveform<f64> = read_wav(&path).unwrap();
        assert!(w.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn unsupported_and_corrupt_inputs() {
        let path = write_raw(1, 8, hound::SampleFormat::Int, &[vec![3i8]]);
        assert!(matches!(read_wav::<f32>(&path), Err(IngestError::UnsupportedEncoding { .. })));

        let garbage = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(garbage.path(), b"RIFX0000WAVEjunk").unwrap();
        assert!(matches!(read_wav::<f32>(garbage.path()), Err(IngestError::CorruptHeader { .. })));
    }

    #[test]
    fn write_then_read_pcm16() {
        let wave = Waveform::new(vec![0.0f32, 0.25, -0.5, -1.0], 32_000);
        let path = tempfile::Builder::new().suffix(".wav").tempfile().unwrap().into_temp_path();
        write_wav(&path, &wave, WavEncoding::Pcm16).unwrap();
        let back: Waveform<f32> = read_wav(&path).unwrap();
        assert_eq!(back.samples(), wave.samples());
    }
}
