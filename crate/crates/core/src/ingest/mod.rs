//! Dataset loading and embedding interchange.

mod augment;
mod dump;
mod manifest;
mod wav;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use augment::{load_augmented_captions, AugmentationMap, AugmentedCaptionSet};
pub use dump::{
    read_embedding_dump, read_spectrogram_cache, write_embedding_dump, write_spectrogram_cache,
    EmbeddingDump, DUMP_MAGIC,
};
pub use manifest::{load_manifest, ClipRecord, CAPTIONS_PER_CLIP};
pub use wav::{read_wav, write_wav, WavEncoding};

/// Number of rephrased variants generated for each caption.
pub const VARIANTS_PER_CAPTION: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {error}")]
    Io { path: PathBuf, error: std::io::Error },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}: duplicate clip id `{clip_id}`")]
    DuplicateClipId { path: PathBuf, row: usize, clip_id: String },
    #[error("{path}: row {row}: expected 5 captions, found {found}")]
    WrongCaptionCount { path: PathBuf, row: usize, found: usize },
    #[error("{path}: row {row}: {reason}")]
    MalformedRow { path: PathBuf, row: usize, reason: String },
    #[error("{path}: line {line}: expected 5 variants, found {found}")]
    VariantCountMismatch { path: PathBuf, line: usize, found: usize },
    #[error("{path}: line {line}: duplicate entry for ({clip_id}, {caption_index})")]
    DuplicateAugmentation { path: PathBuf, line: usize, clip_id: String, caption_index: usize },
    #[error("augmented captions reference unknown clip id `{0}`")]
    UnknownClipId(String),
    #[error("{path}: unsupported audio encoding: {detail}")]
    UnsupportedEncoding { path: PathBuf, detail: String },
    #[error("{path}: corrupt WAV header: {detail}")]
    CorruptHeader { path: PathBuf, detail: String },
    #[error("{path}: bad magic bytes, not an embedding dump")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported dump version {version}")]
    UnsupportedVersion { path: PathBuf, version: u32 },
    #[error("{path}: file truncated")]
    TruncatedFile { path: PathBuf },
    #[error("{path}: {detail}")]
    CorruptDump { path: PathBuf, detail: String },
    #[error("entry `{id}`: expected dimension {expected}, found {found}")]
    DimMismatch { id: String, expected: usize, found: usize },
    #[error("entry `{id}`: vector contains a non-finite value")]
    NonFinite { id: String },
    #[error("duplicate dump id `{0}`")]
    DuplicateId(String),
    #[error("dump id `{0}` longer than 65535 bytes")]
    IdTooLong(String),
    #[error("refusing to write an empty dump")]
    EmptyDump,
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.to_path_buf(), error: source }
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    let mut file = std::fs::File::create(&tmp).map_err(|e| IngestError::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| IngestError::io(&tmp, e))?;
    file.sync_all().map_err(|e| IngestError::io(&tmp, e))?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(|e| IngestError::io(path, e))
}
