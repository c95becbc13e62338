//! Shared value types: spatial grids, complex image sequences, and the
//! inner-product convention used throughout the crate.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Spatial layout of an imaged slice: a 1-D line of voxels or a 2-D plane.
///
/// 2-D grids are stored row-major: voxel `(r, c)` has flat index `r * cols + c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridDims {
    OneD(usize),
    TwoD { rows: usize, cols: usize },
}

impl GridDims {
    pub fn num_voxels(&self) -> usize {
        match *self {
            GridDims::OneD(n) => n,
            GridDims::TwoD { rows, cols } => rows * cols,
        }
    }

    pub fn is_two_d(&self) -> bool {
        matches!(self, GridDims::TwoD { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_voxels() == 0 {
            return Err(Error::Config("grid has zero voxels".into()));
        }
        Ok(())
    }
}

impl std::fmt::Display for GridDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            GridDims::OneD(n) => write!(f, "{n}"),
            GridDims::TwoD { rows, cols } => write!(f, "{rows}x{cols}"),
        }
    }
}

/// Complex magnetization image sequence: `N` voxels observed over `L` read times.
///
/// Stored voxel-major; the length-`L` sequence of voxel `i` is the contiguous
/// slice `data[i*L .. (i+1)*L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSequence {
    grid: GridDims,
    num_frames: usize,
    data: Vec<Complex64>,
}

impl ImageSequence {
    pub fn zeros(grid: GridDims, num_frames: usize) -> Self {
        ImageSequence {
            grid,
            num_frames,
            data: vec![Complex64::ZERO; grid.num_voxels() * num_frames],
        }
    }

    pub fn from_data(grid: GridDims, num_frames: usize, data: Vec<Complex64>) -> Result<Self> {
        let expected = grid.num_voxels() * num_frames;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "image sequence buffer",
                expected,
                actual: data.len(),
            });
        }
        Ok(ImageSequence {
            grid,
            num_frames,
            data,
        })
    }

    pub fn grid(&self) -> GridDims {
        self.grid
    }

    pub fn num_voxels(&self) -> usize {
        self.grid.num_voxels()
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, voxel: usize) -> &[Complex64] {
        &self.data[voxel * self.num_frames..(voxel + 1) * self.num_frames]
    }

    pub fn row_mut(&mut self, voxel: usize) -> &mut [Complex64] {
        &mut self.data[voxel * self.num_frames..(voxel + 1) * self.num_frames]
    }

    /// Copy frame `t` (one spatial image, length `N`) into `out`.
    pub fn gather_frame(&self, t: usize, out: &mut [Complex64]) {
        debug_assert_eq!(out.len(), self.num_voxels());
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.data[i * self.num_frames + t];
        }
    }

    /// Write frame `t` back from a length-`N` spatial image.
    pub fn scatter_frame(&mut self, t: usize, frame: &[Complex64]) {
        debug_assert_eq!(frame.len(), self.num_voxels());
        for (i, &v) in frame.iter().enumerate() {
            self.data[i * self.num_frames + t] = v;
        }
    }

    /// Elementwise `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &ImageSequence) -> Result<ImageSequence> {
        if self.grid != other.grid || self.num_frames != other.num_frames {
            return Err(Error::DimensionMismatch {
                context: "image sequence sum",
                expected: self.data.len(),
                actual: other.data.len(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| Complex64::new(a.re + scale * b.re, a.im + scale * b.im))
            .collect();
        Ok(ImageSequence {
            grid: self.grid,
            num_frames: self.num_frames,
            data,
        })
    }

    /// Elementwise `scale * self`.
    pub fn scaled(&self, scale: f64) -> ImageSequence {
        ImageSequence {
            grid: self.grid,
            num_frames: self.num_frames,
            data: self
                .data
                .iter()
                .map(|a| Complex64::new(scale * a.re, scale * a.im))
                .collect(),
        }
    }

    pub fn frob_norm(&self) -> f64 {
        norm_sqr_sum(&self.data).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Inner product convention used everywhere in this crate:
/// `<a, b> = sum_t conj(a_t) * b_t`. This returns its real part.
pub fn re_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc0 = 0.0f64;
    let mut acc1 = 0.0f64;
    let mut it = a.chunks_exact(2).zip(b.chunks_exact(2));
    for (pa, pb) in &mut it {
        acc0 += pa[0].re * pb[0].re + pa[0].im * pb[0].im;
        acc1 += pa[1].re * pb[1].re + pa[1].im * pb[1].im;
    }
    if a.len() % 2 == 1 {
        let t = a.len() - 1;
        acc0 += a[t].re * b[t].re + a[t].im * b[t].im;
    }
    acc0 + acc1
}

/// Full complex inner product `<a, b> = sum_t conj(a_t) * b_t`.
pub fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Sum of squared moduli.
pub fn norm_sqr_sum(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
