//! Binary checkpoint: `ACRC`, version, dims, config fingerprint, step count,
//! then both heads and both Adam states, all little-endian with 32-bit floats.

use std::path::Path;

use super::{AdamState, ModelState, ProjectionHead, SpaceError};
use crate::ingest::atomic_write;
use crate::Scalar;

const MAGIC: &[u8; 4] = b"ACRC";
const VERSION: u32 = 1;

/// A loaded checkpoint with the fingerprint of the config that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub config_hash: u64,
    pub state: ModelState<T>,
}

fn put_floats<T: Scalar>(out: &mut Vec<u8>, values: &[T]) {
    for v in values {
        out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
}

fn put_adam<T: Scalar>(out: &mut Vec<u8>, s: &AdamState<T>) {
    out.extend_from_slice(&s.step.to_le_bytes());
    put_floats(out, &s.m);
    put_floats(out, &s.v);
}

pub fn encode_checkpoint<T: Scalar>(state: &ModelState<T>, config_hash: u64) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(state.audio.d_in() as u32).to_le_bytes());
    out.extend_from_slice(&(state.text.d_in() as u32).to_le_bytes());
    out.extend_from_slice(&(state.audio.d_out() as u32).to_le_bytes());
    out.extend_from_slice(&config_hash.to_le_bytes());
    out.extend_from_slice(&state.step.to_le_bytes());
    put_floats(&mut out, state.audio.params());
    put_floats(&mut out, state.text.params());
    put_adam(&mut out, &state.adam_audio);
    put_adam(&mut out, &state.adam_text);
    out
}

pub fn save_checkpoint<T: Scalar>(path: &Path, state: &ModelState<T>, config_hash: u64) -> Result<(), SpaceError> {
    atomic_write(path, &encode_checkpoint(state, config_hash)).map_err(|e| SpaceError::Checkpoint {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated file")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn floats<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>, String> {
        let raw = self.take(n.checked_mul(4).ok_or("size overflow")?)?;
        raw.chunks_exact(4)
            .map(|c| {
                let v = f32::from_le_bytes(c.try_into().expect("4 bytes"));
                if v.is_finite() {
                    Ok(T::lit(v as f64))
                } else {
                    Err("non-finite value".to_string())
                }
            })
            .collect()
    }

    fn adam<T: Scalar>(&mut self, n: usize) -> Result<AdamState<T>, String> {
        let step = self.u64()?;
        let m = self.floats(n)?;
        let v = self.floats(n)?;
        Ok(AdamState { m, v, step })
    }
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let audio_in = r.u32()? as usize;
    let text_in = r.u32()? as usize;
    let d_out = r.u32()? as usize;
    if audio_in == 0 || text_in == 0 || d_out == 0 {
        return Err("zero dimension in header".into());
    }
    let config_hash = r.u64()?;
    let step = r.u64()?;
    let na = (audio_in + 1) * d_out;
    let nt = (text_in + 1) * d_out;
    let audio = ProjectionHead::from_params(audio_in, d_out, r.floats(na)?).map_err(|e| e.to_string())?;
    let text = ProjectionHead::from_params(text_in, d_out, r.floats(nt)?).map_err(|e| e.to_string())?;
    let adam_audio = r.adam(na)?;
    let adam_text = r.adam(nt)?;
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(Checkpoint { config_hash, state: ModelState { audio, text, adam_audio, adam_text, step } })
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>, SpaceError> {
    let err = |detail: String| SpaceError::Checkpoint { path: path.display().to_string(), detail };
    let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
    decode_checkpoint(&bytes).map_err(err)
}
