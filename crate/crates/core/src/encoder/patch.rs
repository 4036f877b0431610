use rand::seq::index;
use rand::Rng;

use super::EncoderError;
use crate::dsp::{Spectrogram, MEL_BINS};
use crate::Scalar;

/// Patch size, stride, structured-patchout amounts and the supported input
/// length of a spectrogram transformer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchGeometry {
    pub patch_f: usize,
    pub patch_t: usize,
    pub stride_f: usize,
    pub stride_t: usize,
    /// Frequency rows removed by structured patchout during training.
    pub drop_f: usize,
    /// Time columns removed by structured patchout during training.
    pub drop_t: usize,
    pub max_input_seconds: f64,
}

impl PatchGeometry {
    /// 16x16 patches without overlap, patchout (2; 15), 10 s input.
    pub fn passt_n() -> Self {
        Self { patch_f: 16, patch_t: 16, stride_f: 16, stride_t: 16, drop_f: 2, drop_t: 15, max_input_seconds: 10.0 }
    }

    /// 16x16 patches with stride 10, patchout (4; 50), 10 s input.
    pub fn passt_s() -> Self {
        Self { patch_f: 16, patch_t: 16, stride_f: 10, stride_t: 10, drop_f: 4, drop_t: 50, max_input_seconds: 10.0 }
    }

    /// Like `passt_s` but for 20 s input, patchout (4; 80).
    pub fn passt_s20() -> Self {
        Self { drop_t: 80, max_input_seconds: 20.0, ..Self::passt_s() }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "passt-n" => Some(Self::passt_n()),
            "passt-s" => Some(Self::passt_s()),
            "passt-s20" => Some(Self::passt_s20()),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 3] = ["passt-n", "passt-s", "passt-s20"];

    pub fn patch_dim(&self) -> usize {
        self.patch_f * self.patch_t
    }

    /// `(rows, cols)` for a spectrogram of `frames` frames, if it fits.
    pub fn grid_shape(&self, frames: usize) -> Option<(usize, usize)> {
        if self.stride_f == 0 || self.stride_t == 0 || frames < self.patch_t || MEL_BINS < self.patch_f {
            return None;
        }
        Some((
            1 + (MEL_BINS - self.patch_f) / self.stride_f,
            1 + (frames - self.patch_t) / self.stride_t,
        ))
    }
}

/// Patches of one spectrogram, each tagged with its `(row, col)` position in
/// the full grid. `rows`/`cols` always describe the full grid, so after
/// patchout `len() < rows * cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid<T> {
    rows: usize,
    cols: usize,
    patch_dim: usize,
    tags: Vec<(usize, usize)>,
    data: Vec<T>,
}

impl<T: Scalar> PatchGrid<T> {
    /// Assembles a grid from tagged patches. Tags must be unique and inside
    /// `rows x cols`.
    pub fn from_patches(
        rows: usize,
        cols: usize,
        patch_dim: usize,
        patches: Vec<((usize, usize), Vec<T>)>,
    ) -> Result<Self, EncoderError> {
        let mut seen = std::collections::HashSet::new();
        let mut tags = Vec::with_capacity(patches.len());
        let mut data = Vec::with_capacity(patches.len() * patch_dim);
        for (tag, values) in patches {
            if values.len() != patch_dim {
                return Err(EncoderError::DimMismatch { expected: patch_dim, found: values.len() });
            }
            if tag.0 >= rows || tag.1 >= cols || !seen.insert(tag) {
                return Err(EncoderError::InvalidParams(format!("bad or repeated tag {tag:?}")));
            }
            tags.push(tag);
            data.extend(values);
        }
        Ok(Self { rows, cols, patch_dim, tags, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_dim
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[(usize, usize)] {
        &self.tags
    }

    pub fn patch(&self, i: usize) -> &[T] {
        &self.data[i * self.patch_dim..(i + 1) * self.patch_dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &[T])> + '_ {
        self.tags.iter().copied().zip(self.data.chunks_exact(self.patch_dim))
    }

    /// Reorders patches; `order` must be a permutation of `0..len()`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.len());
        let mut tags = Vec::with_capacity(self.len());
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            tags.push(self.tags[i]);
            data.extend_from_slice(self.patch(i));
        }
        Self { tags, data, ..*self }
    }
}

/// Cuts the spectrogram into `patch_f x patch_t` patches, row-major over
/// (frequency, time). Each patch is flattened frequency-major.
pub fn extract_patches<T: Scalar>(s: &Spectrogram<T>, g: &PatchGeometry) -> Result<PatchGrid<T>, EncoderError> {
    let (rows, cols) = g.grid_shape(s.frames()).ok_or(EncoderError::InputTooShort {
        frames: s.frames(),
        bins: MEL_BINS,
        patch_f: g.patch_f,
        patch_t: g.patch_t,
    })?;
    let patch_dim = g.patch_dim();
    let mut tags = Vec::with_capacity(rows * cols);
    let mut data = Vec::with_capacity(rows * cols * patch_dim);
    for r in 0..rows {
        let f0 = r * g.stride_f;
        for c in 0..cols {
            let t0 = c * g.stride_t;
            tags.push((r, c));
            for df in 0..g.patch_f {
                for dt in 0..g.patch_t {
                    data.push(s.get(t0 + dt, f0 + df));
                }
            }
        }
    }
    Ok(PatchGrid { rows, cols, patch_dim, tags, data })
}

/// Removes `drop_f` whole frequency rows and `drop_t` whole time columns,
/// each chosen uniformly without replacement. Survivors keep their tags.
pub fn structured_patchout<T: Scalar, R: Rng + ?Sized>(
    grid: &PatchGrid<T>,
    drop_f: usize,
    drop_t: usize,
    rng: &mut R,
) -> Result<PatchGrid<T>, EncoderError> {
    let (rows, cols) = (grid.rows, grid.cols);
    if drop_f >= rows || drop_t >= cols {
        return Err(EncoderError::DropExceedsGrid { drop_f, drop_t, rows, cols });
    }
    let mut keep_row = vec![true; rows];
    for r in index::sample(rng, rows, drop_f) {
        keep_row[r] = false;
    }
    let mut keep_col = vec![true; cols];
    for c in index::sample(rng, cols, drop_t) {
        keep_col[c] = false;
    }
    let mut tags = Vec::new();
    let mut data = Vec::new();
    for ((r, c), p) in grid.iter() {
        if keep_row[r] && keep_col[c] {
            tags.push((r, c));
            data.extend_from_slice(p);
        }
    }
    Ok(PatchGrid { tags, data, ..*grid })
}
