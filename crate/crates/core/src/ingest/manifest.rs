use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::IngestError;

pub const CAPTIONS_PER_CLIP: usize = 5;

const CAPTION_COLUMNS: [&str; CAPTIONS_PER_CLIP] =
    ["caption_1", "caption_2", "caption_3", "caption_4", "caption_5"];

/// One recording with its five reference captions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipRecord {
    pub clip_id: String,
    /// Path as written in the manifest; resolve against an audio directory.
    pub audio_path: PathBuf,
    pub captions: [String; CAPTIONS_PER_CLIP],
    pub keywords: Vec<String>,
}

impl ClipRecord {
    pub fn resolve_audio(&self, audio_dir: &Path) -> PathBuf {
        audio_dir.join(&self.audio_path)
    }
}

/// Parses a caption manifest.
///
/// Required header columns are `file_name` and `caption_1` .. `caption_5`; an
/// optional `keywords` column holds semicolon-separated tags. Rows are
/// numbered from 1 (the first line after the header). The file name doubles
/// as the clip id.
pub fn load_manifest(path: &Path) -> Result<Vec<ClipRecord>, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| malformed(path, 0, e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let missing = |name: &str| IngestError::MissingColumn {
        path: path.to_path_buf(),
        column: name.to_string(),
    };

    let file_col = column("file_name").ok_or_else(|| missing("file_name"))?;
    let mut caption_cols = [0usize; CAPTIONS_PER_CLIP];
    for (slot, name) in caption_cols.iter_mut().zip(CAPTION_COLUMNS) {
        *slot = column(name).ok_or_else(|| missing(name))?;
    }
    let keyword_col = column("keywords");

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| malformed(path, row_no, e.to_string()))?;
        if row.len() > headers.len() {
            return Err(malformed(
                path,
                row_no,
                format!("{} cells for {} columns", row.len(), headers.len()),
            ));
        }
        let clip_id = row.get(file_col).unwrap_or("").trim().to_string();
        if clip_id.is_empty() {
            return Err(malformed(path, row_no, "empty file_name".to_string()));
        }

        let captions: Vec<String> = caption_cols
            .iter()
            .filter_map(|&c| row.get(c))
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
        let captions: [String; CAPTIONS_PER_CLIP] =
            captions
                .try_into()
                .map_err(|found: Vec<String>| IngestError::WrongCaptionCount {
                    path: path.to_path_buf(),
                    row: row_no,
                    found: found.len(),
                })?;

        let keywords = keyword_col
            .and_then(|c| row.get(c))
            .map(|k| {
                k.split(';')
                    .map(str::trim)
                    .filter(|k| !k.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default();

        if !seen.insert(clip_id.clone()) {
            return Err(IngestError::DuplicateClipId {
                path: path.to_path_buf(),
                row: row_no,
                clip_id,
            });
        }
        records.push(ClipRecord {
            audio_path: PathBuf::from(&clip_id),
            clip_id,
            captions,
            keywords,
        });
    }
    Ok(records)
}

fn malformed(path: &Path, row: usize, reason: String) -> IngestError {
    IngestError::MalformedRow { path: path.to_path_buf(), row, reason }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "file_name,caption_1,caption_2,caption_3,caption_4,caption_5";

    #[test]
    fn two_rows_yield_ten_captions_in_order() {
        let f = write_tmp(&format!(
            "{HEADER}\na.wav,c1,c2,c3,c4,c5\nb.wav,\"d1, with comma\",d2,d3,d4,d5\n"
        ));
        let records = load_manifest(f.path()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records.iter().map(|r| r.captions.len()).sum::<usize>(), 10);
        assert_eq!(records[0].clip_id, "a.wav");
        assert_eq!(records[1].captions[0], "d1, with comma");
        assert!(records[0].keywords.is_empty());
    }

    #[test]
    fn keywords_are_split_on_semicolons() {
        let f = write_tmp(&format!("{HEADER},keywords\na.wav,c1,c2,c3,c4,c5,dull; metal;\n"));
        let records = load_manifest(f.path()).unwrap();
        assert_eq!(records[0].keywords, vec!["dull", "metal"]);
    }

    #[test]
    fn four_caption_cells_is_an_error_naming_the_row() {
        let f = write_tmp(&format!("{HEADER}\na.wav,c1,c2,c3,c4,c5\nb.wav,c1,c2,c3,c4\n"));
        match load_manifest(f.path()) {
            Err(IngestError::WrongCaptionCount { row, found, .. }) => {
                assert_eq!((row, found), (2, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_duplicate_ids() {
        let f = write_tmp("file_name,caption_1,caption_2,caption_3,caption_4\n");
        assert!(matches!(
            load_manifest(f.path()),
            Err(IngestError::MissingColumn { column, .. }) if column == "caption_5"
        ));
        let f = write_tmp(&format!("{HEADER}\na.wav,1,2,3,4,5\na.wav,1,2,3,4,5\n"));
        assert!(matches!(
            load_manifest(f.path()),
            Err(IngestError::DuplicateClipId { row: 2, .. })
        ));
    }

    #[test]
    fn extra_cells_are_rejected() {
        let f = write_tmp(&format!("{HEADER}\na.wav,1,2,3,4,5,6\n"));
        assert!(matches!(
            load_manifest(f.path()),
            Err(IngestError::MalformedRow { row: 1, .. })
        ));
    }
}
