//! The linear observation map and its adjoint: a unitary spatial DFT per
//! frame composed with randomized-shift EPI subsampling, plus an empirical
//! probe of the near-isometry constant on dictionary chords.
//!
//! k-space is subsampled regularly by a factor `p` along one axis, with an
//! independent uniform random shift per frame. In 2-D the decimated axis
//! keeps whole lines of the other axis, as in an echo-planar readout. Kept
//! frequency indices at shift `z` are `{z, z+p, ..., z+(M-1)p}` and samples
//! are enumerated in that order (row-major over kept rows in 2-D).

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::bloch::BlochDictionary;
use crate::error::{Error, Result};
use crate::types::{norm_sqr_sum, GridDims, ImageSequence};

/// Which spatial axis of a 2-D grid is decimated in k-space. Ignored for
/// 1-D grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsampledAxis {
    Rows,
    Cols,
}

/// Undersampling geometry for one acquisition: factor `p`, one random shift
/// per frame, and the spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub p: usize,
    pub shifts: Vec<usize>,
    pub grid: GridDims,
    pub axis: SubsampledAxis,
    pub seed: u64,
}

impl SamplingPlan {
    /// Draw per-frame shifts i.i.d. uniform on `{0, .., p-1}` from a seeded
    /// generator. `p` must divide the decimated axis exactly.
    pub fn new(
        p: usize,
        num_frames: usize,
        grid: GridDims,
        axis: SubsampledAxis,
        seed: u64,
    ) -> Result<Self> {
        grid.validate()?;
        if p == 0 {
            return Err(Error::Config("undersampling factor p must be >= 1".into()));
        }
        if num_frames == 0 {
            return Err(Error::Config("sampling plan needs at least one frame".into()));
        }
        let axis_len = match grid {
            GridDims::OneD(n) => n,
            GridDims::TwoD { rows, cols } => match axis {
                SubsampledAxis::Rows => rows,
                SubsampledAxis::Cols => cols,
            },
        };
        if axis_len % p != 0 {
            return Err(Error::Config(format!(
                "undersampling factor {p} does not divide the decimated axis length {axis_len}"
            )));
        }
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let shifts = (0..num_frames)
            .map(|_| rng.random_range(0..p as u64) as usize)
            .collect();
        Ok(SamplingPlan {
            p,
            shifts,
            grid,
            axis,
            seed,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.shifts.len()
    }

    /// Samples kept per frame.
    pub fn samples_per_frame(&self) -> usize {
        self.grid.num_voxels() / self.p
    }

    /// The undersampling ratio `N / M` as a float.
    pub fn n_over_m(&self) -> f64 {
        self.p as f64
    }

    /// Flattened k-space indices kept at frame `t`, in canonical order.
    pub fn kept_indices(&self, t: usize) -> Vec<usize> {
        let shift = self.shifts[t];
        match self.grid {
            GridDims::OneD(n) => (0..n / self.p).map(|j| shift + j * self.p).collect(),
            GridDims::TwoD { rows, cols } => match self.axis {
                SubsampledAxis::Rows => {
                    let mut out = Vec::with_capacity(rows / self.p * cols);
                    for j in 0..rows / self.p {
                        let kr = shift + j * self.p;
                        out.extend((0..cols).map(|kc| kr * cols + kc));
                    }
                    out
                }
                SubsampledAxis::Cols => {
                    let mut out = Vec::with_capacity(rows * cols / self.p);
                    for kr in 0..rows {
                        out.extend((0..cols / self.p).map(|j| kr * cols + shift + j * self.p));
                    }
                    out
                }
            },
        }
    }
}

/// Undersampled k-space measurements: `M x L` complex samples plus the plan
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    /// Frame-major storage: frame `t` occupies `samples[t*M .. (t+1)*M]`.
    samples: Vec<Complex64>,
    plan: SamplingPlan,
}

impl KSpaceData {
    pub fn from_parts(samples: Vec<Complex64>, plan: SamplingPlan) -> Result<Self> {
        let expected = plan.samples_per_frame() * plan.num_frames();
        if samples.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "k-space sample buffer",
                expected,
                actual: samples.len(),
            });
        }
        Ok(KSpaceData { samples, plan })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn plan(&self) -> &SamplingPlan {
        &self.plan
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        let m = self.plan.samples_per_frame();
        &self.samples[t * m..(t + 1) * m]
    }

    pub fn frob_norm(&self) -> f64 {
        norm_sqr_sum(&self.samples).sqrt()
    }
}

/// Unitary DFT engine for one grid geometry.
pub(crate) struct FrameTransform {
    grid: GridDims,
    fwd_a: Arc<dyn Fft<f64>>,
    inv_a: Arc<dyn Fft<f64>>,
    fwd_b: Option<Arc<dyn Fft<f64>>>,
    inv_b: Option<Arc<dyn Fft<f64>>>,
    scale: f64,
}

impl FrameTransform {
    pub(crate) fn new(grid: GridDims) -> Self {
        let mut planner = FftPlanner::new();
        match grid {
            GridDims::OneD(n) => FrameTransform {
                grid,
                fwd_a: planner.plan_fft_forward(n),
                inv_a: planner.plan_fft_inverse(n),
                fwd_b: None,
                inv_b: None,
                scale: 1.0 / (n as f64).sqrt(),
            },
            GridDims::TwoD { rows, cols } => FrameTransform {
                grid,
                fwd_a: planner.plan_fft_forward(cols),
                inv_a: planner.plan_fft_inverse(cols),
                fwd_b: Some(planner.plan_fft_forward(rows)),
                inv_b: Some(planner.plan_fft_inverse(rows)),
                scale: 1.0 / ((rows * cols) as f64).sqrt(),
            },
        }
    }

    fn apply(&self, frame: &mut [Complex64], forward: bool) {
        match self.grid {
            GridDims::OneD(_) => {
                let fft = if forward { &self.fwd_a } else { &self.inv_a };
                fft.process(frame);
            }
            GridDims::TwoD { rows, cols } => {
                let row_fft = if forward { &self.fwd_a } else { &self.inv_a };
                let col_fft = if forward {
                    self.fwd_b.as_ref().unwrap()
                } else {
                    self.inv_b.as_ref().unwrap()
                };
                for row in frame.chunks_exact_mut(cols) {
                    row_fft.process(row);
                }
                let mut col = vec![Complex64::ZERO; rows];
                for c in 0..cols {
                    for r in 0..rows {
                        col[r] = frame[r * cols + c];
                    }
                    col_fft.process(&mut col);
                    for r in 0..rows {
                        frame[r * cols + c] = col[r];
                    }
                }
            }
        }
        for z in frame.iter_mut() {
            *z *= self.scale;
        }
    }

    /// In-place unitary forward DFT of one spatial frame.
    pub(crate) fn forward(&self, frame: &mut [Complex64]) {
        self.apply(frame, true);
    }

    /// In-place unitary inverse DFT of one spatial frame.
    pub(crate) fn inverse(&self, frame: &mut [Complex64]) {
        self.apply(frame, false);
    }
}

/// Apply the observation map: per frame, unitary DFT then keep the rows
/// selected by that frame's shift.
pub fn forward(x: &ImageSequence, plan: &SamplingPlan) -> Result<KSpaceData> {
    if x.grid() != plan.grid {
        return Err(Error::DimensionMismatch {
            context: "image grid vs sampling plan",
            expected: plan.grid.num_voxels(),
            actual: x.grid().num_voxels(),
        });
    }
    if x.num_frames() != plan.num_frames() {
        return Err(Error::DimensionMismatch {
            context: "image frames vs sampling plan",
            expected: plan.num_frames(),
            actual: x.num_frames(),
        });
    }
    let n = plan.grid.num_voxels();
    let m = plan.samples_per_frame();
    let transform = FrameTransform::new(plan.grid);
    let mut samples = vec![Complex64::ZERO; m * plan.num_frames()];
    samples
        .par_chunks_mut(m)
        .enumerate()
        .for_each_init(
            || vec![Complex64::ZERO; n],
            |frame_buf, (t, out)| {
                x.gather_frame(t, frame_buf);
                transform.forward(frame_buf);
                for (slot, &k) in out.iter_mut().zip(plan.kept_indices(t).iter()) {
                    *slot = frame_buf[k];
                }
            },
        );
    KSpaceData::from_parts(samples, plan.clone())
}

/// Apply the adjoint map: per frame, zero-fill the unsampled coefficients
/// and take the unitary inverse DFT.
pub fn adjoint(y: &KSpaceData) -> Result<ImageSequence> {
    adjoint_raw(y.samples(), y.plan())
}

/// Adjoint of the observation map on a raw frame-major sample buffer.
pub(crate) fn adjoint_raw(samples: &[Complex64], plan: &SamplingPlan) -> Result<ImageSequence> {
    let n = plan.grid.num_voxels();
    let m = plan.samples_per_frame();
    let l = plan.num_frames();
    if samples.len() != m * l {
        return Err(Error::DimensionMismatch {
            context: "k-space buffer vs sampling plan",
            expected: m * l,
            actual: samples.len(),
        });
    }
    let transform = FrameTransform::new(plan.grid);
    let frames: Vec<Vec<Complex64>> = (0..l)
        .into_par_iter()
        .map(|t| {
            let mut frame = vec![Complex64::ZERO; n];
            for (&v, &k) in samples[t * m..(t + 1) * m]
                .iter()
                .zip(plan.kept_indices(t).iter())
            {
                frame[k] = v;
            }
            transform.inverse(&mut frame);
            frame
        })
        .collect();
    let mut out = ImageSequence::zeros(plan.grid, l);
    for (t, frame) in frames.iter().enumerate() {
        out.scatter_frame(t, frame);
    }
    Ok(out)
}

/// Summary of the empirical near-isometry probe.
#[derive(Debug, Clone, PartialEq)]
pub struct RipProbe {
    pub r_min: f64,
    pub r_max: f64,
    pub r_mean: f64,
    /// `max |r - 1|` over sampled chords.
    pub delta_hat: f64,
    pub num_chords: usize,
    pub seed: u64,
}

/// Sample dictionary chords placed at one or two random voxels and measure
/// the energy ratio `r = (N/M) * |h(u)|^2 / |u|^2` for each.
///
/// Both energies are evaluated from the same full-DFT coefficients (the
/// denominator via Parseval), so at `p = 1` every ratio is exactly 1.
pub fn empirical_rip_probe(
    dict: &BlochDictionary,
    plan: &SamplingPlan,
    num_chords: usize,
    seed: u64,
) -> Result<RipProbe> {
    if num_chords == 0 {
        return Err(Error::Config("probe needs at least one chord".into()));
    }
    if dict.seq_len() != plan.num_frames() {
        return Err(Error::DimensionMismatch {
            context: "dictionary length vs sampling plan",
            expected: plan.num_frames(),
            actual: dict.seq_len(),
        });
    }
    let n = plan.grid.num_voxels();
    let l = plan.num_frames();
    let n_over_m = plan.n_over_m();
    let transform = FrameTransform::new(plan.grid);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);

    let mut r_min = f64::INFINITY;
    let mut r_max = f64::NEG_INFINITY;
    let mut r_sum = 0.0;
    let mut used = 0usize;
    let mut frame = vec![Complex64::ZERO; n];

    for _ in 0..num_chords {
        let k1 = rng.random_range(0..dict.num_atoms() as u64) as usize;
        let k2 = rng.random_range(0..dict.num_atoms() as u64) as usize;
        let rho1 = 0.25 + 1.75 * rng.random::<f64>();
        let rho2 = 0.25 + 1.75 * rng.random::<f64>();
        let v1 = rng.random_range(0..n as u64) as usize;
        let two_voxel = n > 1 && rng.random::<bool>();
        let v2 = if two_voxel {
            let mut v = rng.random_range(0..n as u64) as usize;
            while v == v1 {
                v = rng.random_range(0..n as u64) as usize;
            }
            Some(v)
        } else {
            None
        };

        let a1 = dict.atom(k1);
        let a2 = dict.atom(k2);
        let mut kept_energy = 0.0;
        let mut total_energy = 0.0;
        for t in 0..l {
            frame.fill(Complex64::ZERO);
            match v2 {
                Some(v2) => {
                    frame[v1] = rho1 * a1[t];
                    frame[v2] = -rho2 * a2[t];
                }
                None => {
                    frame[v1] = rho1 * a1[t] - rho2 * a2[t];
                }
            }
            transform.forward(&mut frame);
            // Per-frame subtotals accumulated identically, so at p = 1 the
            // kept energy is bitwise equal to the total energy.
            let mut kept_t = 0.0;
            for &k in plan.kept_indices(t).iter() {
                kept_t += frame[k].norm_sqr();
            }
            kept_energy += kept_t;
            total_energy += norm_sqr_sum(&frame);
        }
        if total_energy <= 0.0 {
            continue;
        }
        let r = n_over_m * (kept_energy / total_energy);
        r_min = r_min.min(r);
        r_max = r_max.max(r);
        r_sum += r;
        used += 1;
    }
    if used == 0 {
        return Err(Error::DegenerateSampling);
    }
    let delta_hat = (r_max - 1.0).abs().max((r_min - 1.0).abs());
    Ok(RipProbe {
        r_min,
        r_max,
        r_mean: r_sum / used as f64,
        delta_hat,
        num_chords: used,
        seed,
    })
}
