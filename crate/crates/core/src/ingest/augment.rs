use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClipRecord, IngestError, CAPTIONS_PER_CLIP, VARIANTS_PER_CAPTION};

/// Five rephrasings of one reference caption.
///
/// Stored one JSON object per line:
/// `{"clip_id": "a.wav", "caption_index": 0, "variants": ["..", "..", "..", "..", ".."]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedCaptionSet {
    pub clip_id: String,
    pub caption_index: usize,
    pub variants: Vec<String>,
}

pub fn load_augmented_captions(path: &Path) -> Result<Vec<AugmentedCaptionSet>, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut seen = HashMap::new();
    let mut sets = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let set: AugmentedCaptionSet =
            serde_json::from_str(&line).map_err(|e| IngestError::MalformedRow {
                path: path.to_path_buf(),
                row: line_no,
                reason: e.to_string(),
            })?;
        if set.variants.len() != VARIANTS_PER_CAPTION {
            return Err(IngestError::VariantCountMismatch {
                path: path.to_path_buf(),
                line: line_no,
                found: set.variants.len(),
            });
        }
        if set.caption_index >= CAPTIONS_PER_CLIP {
            return Err(IngestError::MalformedRow {
                path: path.to_path_buf(),
                row: line_no,
                reason: format!("caption_index {} out of range 0..=4", set.caption_index),
            });
        }
        match seen.entry((set.clip_id.clone(), set.caption_index)) {
            Entry::Occupied(_) => {
                return Err(IngestError::DuplicateAugmentation {
                    path: path.to_path_buf(),
                    line: line_no,
                    clip_id: set.clip_id,
                    caption_index: set.caption_index,
                })
            }
            Entry::Vacant(v) => {
                v.insert(());
            }
        }
        sets.push(set);
    }
    Ok(sets)
}

/// Lookup from `(clip_id, caption_index)` to its variants.
#[derive(Debug, Clone, Default)]
pub struct AugmentationMap {
    map: HashMap<(String, usize), Vec<String>>,
}

impl AugmentationMap {
    pub fn new(sets: Vec<AugmentedCaptionSet>) -> Self {
        let map = sets
            .into_iter()
            .map(|s| ((s.clip_id, s.caption_index), s.variants))
            .collect();
        Self { map }
    }

    /// Fails on the first set whose clip id is absent from `manifest`.
    pub fn validate_against(&self, manifest: &[ClipRecord]) -> Result<(), IngestError> {
        let known: std::collections::HashSet<&str> =
            manifest.iter().map(|r| r.clip_id.as_str()).collect();
        let mut unknown: Vec<&String> = self
            .map
            .keys()
            .map(|(id, _)| id)
            .filter(|id| !known.contains(id.as_str()))
            .collect();
        unknown.sort();
        match unknown.first() {
            Some(id) => Err(IngestError::UnknownClipId((*id).clone())),
            None => Ok(()),
        }
    }

    pub fn variants(&self, clip_id: &str, caption_index: usize) -> Option<&[String]> {
        self.map
            .get(&(clip_id.to_string(), caption_index))
            .map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn variant_count(&self) -> usize {
        self.map.values().map(Vec::len).sum()
    }
}
