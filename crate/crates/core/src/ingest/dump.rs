//! Binary embedding container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   b"ACRE"
//! version u32        1 = embeddings, 2 = spectrogram cache
//! dim     u32
//! count   u64
//! frames  u32        version 2 only; dim == 128 * frames
//! entries count x { id_len u16, id utf-8 bytes, dim x f32 }
//! ```

use std::collections::HashSet;
use std::path::Path;

use crate::dsp::{Spectrogram, MEL_BINS};

use super::{atomic_write, IngestError};

pub const DUMP_MAGIC: &[u8; 4] = b"ACRE";
const VERSION_EMBEDDINGS: u32 = 1;
const VERSION_SPECTROGRAMS: u32 = 2;

/// Ordered `(id, vector)` pairs of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDump {
    dim: usize,
    entries: Vec<(String, Vec<f32>)>,
}

impl EmbeddingDump {
    /// Validates the dump invariants: nonempty, one dimension, finite
    /// values, unique ids.
    pub fn new(entries: Vec<(String, Vec<f32>)>) -> Result<Self, IngestError> {
        let dim = entries.first().ok_or(IngestError::EmptyDump)?.1.len();
        if dim == 0 {
            return Err(IngestError::DimMismatch { id: entries[0].0.clone(), expected: 1, found: 0 });
        }
        let mut ids = HashSet::with_capacity(entries.len());
        for (id, v) in &entries {
            if v.len() != dim {
                return Err(IngestError::DimMismatch { id: id.clone(), expected: dim, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(IngestError::NonFinite { id: id.clone() });
            }
            if id.len() > u16::MAX as usize {
                return Err(IngestError::IdTooLong(id.clone()));
            }
            if !ids.insert(id.as_str()) {
                return Err(IngestError::DuplicateId(id.clone()));
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, Vec<f32>)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(String, Vec<f32>)> {
        self.entries
    }

    /// Builds an id → vector lookup.
    pub fn to_map(&self) -> std::collections::HashMap<&str, &[f32]> {
        self.entries.iter().map(|(id, v)| (id.as_str(), v.as_slice())).collect()
    }

    fn encode(&self, frames: Option<u32>) -> Vec<u8> {
        let payload: usize = self.entries.iter().map(|(id, _)| 2 + id.len() + 4 * self.dim).sum();
        let mut out = Vec::with_capacity(24 + payload);
        out.extend_from_slice(DUMP_MAGIC);
        let version = if frames.is_some() { VERSION_SPECTROGRAMS } else { VERSION_EMBEDDINGS };
        out.extend_from_slice(&version.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        if let Some(frames) = frames {
            out.extend_from_slice(&frames.to_le_bytes());
        }
        for (id, v) in &self.entries {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }
}

pub fn write_embedding_dump(dump: &EmbeddingDump, path: &Path) -> Result<(), IngestError> {
    atomic_write(path, &dump.encode(None))
}

pub fn read_embedding_dump(path: &Path) -> Result<EmbeddingDump, IngestError> {
    let bytes = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let (dump, frames) = decode(path, &bytes)?;
    if frames.is_some() {
        return Err(IngestError::CorruptDump {
            path: path.to_path_buf(),
            detail: "spectrogram cache where an embedding dump was expected".into(),
        });
    }
    Ok(dump)
}

/// Stores spectrograms of one common frame count.
pub fn write_spectrogram_cache(
    entries: &[(String, Spectrogram<f32>)],
    path: &Path,
) -> Result<(), IngestError> {
    let frames = entries.first().ok_or(IngestError::EmptyDump)?.1.frames();
    let flat = entries
        .iter()
        .map(|(id, s)| (id.clone(), s.values().to_vec()))
        .collect::<Vec<_>>();
    let dump = EmbeddingDump::new(flat)?;
    if dump.dim != MEL_BINS * frames {
        return Err(IngestError::DimMismatch {
            id: entries[0].0.clone(),
            expected: MEL_BINS * frames,
            found: dump.dim,
        });
    }
    atomic_write(path, &dump.encode(Some(frames as u32)))
}

pub fn read_spectrogram_cache(path: &Path) -> Result<Vec<(String, Spectrogram<f32>)>, IngestError> {
    let bytes = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let (dump, frames) = decode(path, &bytes)?;
    let frames = frames.ok_or_else(|| IngestError::CorruptDump {
        path: path.to_path_buf(),
        detail: "embedding dump where a spectrogram cache was expected".into(),
    })? as usize;
    dump.entries
        .into_iter()
        .map(|(id, v)| {
            Spectrogram::from_values(frames, v)
                .map(|s| (id, s))
                .map_err(|e| IngestError::CorruptDump { path: path.to_path_buf(), detail: e.to_string() })
        })
        .collect()
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IngestError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(IngestError::TruncatedFile { path: self.path.to_path_buf() }),
        }
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], IngestError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

fn decode(path: &Path, bytes: &[u8]) -> Result<(EmbeddingDump, Option<u32>), IngestError> {
    let mut cur = Cursor { bytes, pos: 0, path };
    if bytes.len() >= 4 && &bytes[..4] != DUMP_MAGIC {
        return Err(IngestError::BadMagic { path: path.to_path_buf() });
    }
    cur.take(4)?;
    let version = u32::from_le_bytes(cur.array()?);
    let dim = u32::from_le_bytes(cur.array()?) as usize;
    let count = u64::from_le_bytes(cur.array()?);
    let frames = match version {
        VERSION_EMBEDDINGS => None,
        VERSION_SPECTROGRAMS => Some(u32::from_le_bytes(cur.array()?)),
        v => return Err(IngestError::UnsupportedVersion { path: path.to_path_buf(), version: v }),
    };

    let mut entries = Vec::new();
    for _ in 0..count {
        let id_len = u16::from_le_bytes(cur.array()?) as usize;
        let id = std::str::from_utf8(cur.take(id_len)?)
            .map_err(|e| IngestError::CorruptDump { path: path.to_path_buf(), detail: e.to_string() })?
            .to_string();
        let raw = cur.take(dim.checked_mul(4).ok_or(IngestError::TruncatedFile { path: path.to_path_buf() })?)?;
        let v = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        entries.push((id, v));
    }
    if cur.pos != bytes.len() {
        return Err(IngestError::CorruptDump {
            path: path.to_path_buf(),
            detail: format!("{} trailing bytes", bytes.len() - cur.pos),
        });
    }
    let dump = EmbeddingDump::new(entries)?;
    if dump.dim != dim {
        return Err(IngestError::DimMismatch { id: dump.entries[0].0.clone(), expected: dim, found: dump.dim });
    }
    Ok((dump, frames))
}
