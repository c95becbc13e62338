//! Inversion-recovery SSFP magnetization simulation and the discretized
//! response dictionary with its parameter look-up table.
//!
//! The voxel signal model is `x = rho * B(theta; alpha, TR)`: a nonnegative
//! proton density times the unit-density response of the tissue parameters
//! `theta = {T1, T2, df}` under a shared excitation sequence.
//!
//! The recursion implemented here uses an ideal instantaneous inversion,
//! instantaneous flip-angle pulses about the x-axis, an echo readout at
//! `TE = TR/2`, and exact relaxation/precession propagation over each
//! repetition interval. No RF phase cycling is applied.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Per-voxel tissue parameters: relaxation times in milliseconds and
/// off-resonance precession frequency in hertz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TissueParams {
    /// Longitudinal relaxation time (ms), strictly positive.
    pub t1: f64,
    /// Transverse relaxation time (ms), strictly positive.
    pub t2: f64,
    /// Off-resonance frequency (Hz).
    pub df: f64,
}

impl TissueParams {
    pub fn new(t1: f64, t2: f64, df: f64) -> Result<Self> {
        let p = TissueParams { t1, t2, df };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0) || !self.t1.is_finite() {
            return Err(Error::InvalidTissue {
                reason: format!("t1 must be positive and finite, got {}", self.t1),
            });
        }
        if !(self.t2 > 0.0) || !self.t2.is_finite() {
            return Err(Error::InvalidTissue {
                reason: format!("t2 must be positive and finite, got {}", self.t2),
            });
        }
        if !self.df.is_finite() {
            return Err(Error::InvalidTissue {
                reason: format!("df must be finite, got {}", self.df),
            });
        }
        Ok(())
    }
}

/// Excitation sequence: flip angles (radians) and repetition times (ms),
/// both of length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationSequence {
    pub flip_angles: Vec<f64>,
    pub rep_times: Vec<f64>,
}

impl ExcitationSequence {
    pub fn new(flip_angles: Vec<f64>, rep_times: Vec<f64>) -> Result<Self> {
        if flip_angles.is_empty() {
            return Err(Error::InvalidExcitation {
                reason: "sequence length must be at least 1".into(),
            });
        }
        if flip_angles.len() != rep_times.len() {
            return Err(Error::InvalidExcitation {
                reason: format!(
                    "flip angle count {} does not match repetition time count {}",
                    flip_angles.len(),
                    rep_times.len()
                ),
            });
        }
        if let Some(bad) = rep_times.iter().find(|tr| !(**tr > 0.0) || !tr.is_finite()) {
            return Err(Error::InvalidExcitation {
                reason: format!("repetition times must be positive and finite, got {bad}"),
            });
        }
        if let Some(bad) = flip_angles.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidExcitation {
                reason: format!("flip angles must be finite, got {bad}"),
            });
        }
        Ok(ExcitationSequence {
            flip_angles,
            rep_times,
        })
    }

    pub fn len(&self) -> usize {
        self.flip_angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flip_angles.is_empty()
    }
}

/// Draw a random excitation: i.i.d. zero-mean Gaussian flip angles with the
/// given standard deviation in degrees, and a constant repetition time.
///
/// The same seed always yields the same sequence.
pub fn random_excitation(
    length: usize,
    flip_std_deg: f64,
    tr_ms: f64,
    seed: u64,
) -> Result<ExcitationSequence> {
    use rand::SeedableRng;
    use rand_distr::Distribution;

    if length == 0 {
        return Err(Error::InvalidExcitation {
            reason: "sequence length must be at least 1".into(),
        });
    }
    if !(flip_std_deg > 0.0) {
        return Err(Error::InvalidExcitation {
            reason: format!("flip angle standard deviation must be positive, got {flip_std_deg}"),
        });
    }
    if !(tr_ms > 0.0) {
        return Err(Error::InvalidExcitation {
            reason: format!("repetition time must be positive, got {tr_ms}"),
        });
    }
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(0.0, flip_std_deg.to_radians()).expect("positive std");
    let flip_angles = (0..length).map(|_| normal.sample(&mut rng)).collect();
    ExcitationSequence::new(flip_angles, vec![tr_ms; length])
}

/// Instantaneous magnetization of one isochromat, normalized so the
/// equilibrium longitudinal magnetization is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetizationState {
    /// Transverse component `mx + i*my`.
    pub mxy: Complex64,
    /// Longitudinal component.
    pub mz: f64,
}

impl MagnetizationState {
    /// State immediately after an ideal inversion pulse.
    pub fn after_inversion() -> Self {
        MagnetizationState {
            mxy: Complex64::ZERO,
            mz: -1.0,
        }
    }

    /// Rotate the magnetization vector by `alpha` radians about the x-axis.
    pub fn rotate_x(&mut self, alpha: f64) {
        let (s, c) = alpha.sin_cos();
        let my = self.mxy.im;
        self.mxy.im = my * c - self.mz * s;
        self.mz = my * s + self.mz * c;
    }

    /// Free evolution for `duration_ms`: transverse decay and precession,
    /// longitudinal recovery toward equilibrium.
    pub fn relax(&mut self, theta: &TissueParams, duration_ms: f64) {
        self.mxy *= decay_phase(theta, duration_ms);
        self.mz = 1.0 + (self.mz - 1.0) * (-duration_ms / theta.t1).exp();
    }

    /// Transverse magnetization observed `duration_ms` after the current
    /// instant, without advancing the state.
    pub fn peek_transverse(&self, theta: &TissueParams, duration_ms: f64) -> Complex64 {
        self.mxy * decay_phase(theta, duration_ms)
    }

    /// `|mxy|^2 + mz^2`; at most `1 + eps` for physical parameters.
    pub fn norm_sqr(&self) -> f64 {
        self.mxy.norm_sqr() + self.mz * self.mz
    }
}

fn decay_phase(theta: &TissueParams, duration_ms: f64) -> Complex64 {
    let decay = (-duration_ms / theta.t2).exp();
    let phase = TWO_PI * theta.df * duration_ms * 1e-3;
    Complex64::from_polar(decay, phase)
}

/// Simulate the unit-density readout sequence `B(theta; alpha, TR)`.
///
/// The sequence starts from an ideal inversion; at each repetition the
/// magnetization is tipped about x by the flip angle, the transverse
/// component is read at the echo time `TE = TR/2`, and the state is then
/// propagated to the end of the repetition interval.
pub fn simulate_response(
    theta: &TissueParams,
    excitation: &ExcitationSequence,
) -> Result<Vec<Complex64>> {
    theta.validate()?;
    let mut state = MagnetizationState::after_inversion();
    let mut out = Vec::with_capacity(excitation.len());
    for t in 0..excitation.len() {
        let tr = excitation.rep_times[t];
        state.rotate_x(excitation.flip_angles[t]);
        let sample = state.peek_transverse(theta, 0.5 * tr);
        if !sample.re.is_finite() || !sample.im.is_finite() {
            return Err(Error::SimulationFailure { time_index: t });
        }
        out.push(sample);
        state.relax(theta, tr);
    }
    Ok(out)
}

/// Scale a unit-density response by a nonnegative proton density.
pub fn scale_response(rho: f64, response: &[Complex64]) -> Result<Vec<Complex64>> {
    if !(rho >= 0.0) {
        return Err(Error::NegativeDensity { rho });
    }
    Ok(response
        .iter()
        .map(|z| Complex64::new(rho * z.re, rho * z.im))
        .collect())
}

/// Discrete sampling of the tissue parameter space, given as sorted axis
/// values. The dictionary is built over the Cartesian product, keeping only
/// physically feasible combinations with `t2 <= t1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    pub t1_values: Vec<f64>,
    pub t2_values: Vec<f64>,
    pub df_values: Vec<f64>,
}

impl ParameterGrid {
    pub fn new(
        mut t1_values: Vec<f64>,
        mut t2_values: Vec<f64>,
        mut df_values: Vec<f64>,
    ) -> Result<Self> {
        for (name, vals) in [("t1", &mut t1_values), ("t2", &mut t2_values)] {
            if vals.is_empty() {
                return Err(Error::Config(format!("dictionary {name} axis is empty")));
            }
            if vals.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::Config(format!(
                    "dictionary {name} axis must contain positive finite values"
                )));
            }
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
        }
        if df_values.is_empty() {
            return Err(Error::Config("dictionary df axis is empty".into()));
        }
        if df_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(
                "dictionary df axis must contain finite values".into(),
            ));
        }
        df_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        df_values.dedup();
        Ok(ParameterGrid {
            t1_values,
            t2_values,
            df_values,
        })
    }

    /// Expand inclusive `[start, step, stop]` segments into an axis.
    pub fn axis_from_segments(segments: &[[f64; 3]]) -> Result<Vec<f64>> {
        let mut vals = Vec::new();
        for seg in segments {
            let [start, step, stop] = *seg;
            if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
                return Err(Error::Config(format!(
                    "bad grid segment [start={start}, step={step}, stop={stop}]"
                )));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            for k in 0..count {
                vals.push(start + step * k as f64);
            }
        }
        Ok(vals)
    }

    /// Default dictionary grid: piecewise-uniform T1 and T2 axes, coarser at
    /// large values, with off-resonance fixed at zero. After the `t2 <= t1`
    /// feasibility filter this yields 3379 atoms.
    pub fn default_grid() -> Self {
        let t1 = Self::axis_from_segments(&[[100.0, 20.0, 2000.0], [2300.0, 300.0, 5000.0]])
            .expect("static segments");
        let t2 = Self::axis_from_segments(&[
            [20.0, 5.0, 100.0],
            [110.0, 20.0, 200.0],
            [220.0, 20.0, 320.0],
            [400.0, 80.0, 600.0],
            [1000.0, 200.0, 2000.0],
        ])
        .expect("static segments");
        ParameterGrid::new(t1, t2, vec![0.0]).expect("static axes")
    }

    /// Feasible parameter triples in lexicographic `(t1, t2, df)` order,
    /// plus the number of combinations removed by the `t2 <= t1` filter.
    pub fn feasible_triples(&self) -> (Vec<TissueParams>, usize) {
        let mut triples = Vec::new();
        let mut filtered = 0usize;
        for &t1 in &self.t1_values {
            for &t2 in &self.t2_values {
                if t2 > t1 {
                    filtered += self.df_values.len();
                    continue;
                }
                for &df in &self.df_values {
                    triples.push(TissueParams { t1, t2, df });
                }
            }
        }
        (triples, filtered)
    }
}

/// Dictionary of discretized magnetization responses.
///
/// Row `k` of `atoms` is the unit-density response of `lut[k]` under the
/// stored excitation; `atom_norms[k]` is its Euclidean norm.
#[derive(Debug, Clone)]
pub struct BlochDictionary {
    atoms: Vec<Complex64>,
    atom_norms: Vec<f64>,
    lut: Vec<TissueParams>,
    excitation: ExcitationSequence,
    /// Number of nonphysical grid points (t2 > t1) dropped during construction.
    pub infeasible_filtered: usize,
}

impl BlochDictionary {
    /// Simulate every feasible grid point and assemble the dictionary.
    ///
    /// Atom order is lexicographic in `(t1, t2, df)` and the result is
    /// independent of the parallelism used to compute it.
    pub fn build(grid: &ParameterGrid, excitation: &ExcitationSequence) -> Result<Self> {
        let (lut, infeasible_filtered) = grid.feasible_triples();
        if lut.is_empty() {
            return Err(Error::Config(
                "dictionary grid is empty after the t2 <= t1 feasibility filter".into(),
            ));
        }
        let l = excitation.len();
        let rows: Vec<Vec<Complex64>> = lut
            .par_iter()
            .enumerate()
            .map(|(k, theta)| simulate_response(theta, excitation).map_err(|e| e.at_voxel(k)))
            .collect::<Result<_>>()?;

        let mut atoms = Vec::with_capacity(lut.len() * l);
        for row in &rows {
            atoms.extend_from_slice(row);
        }
        let atom_norms: Vec<f64> = rows
            .iter()
            .map(|row| crate::types::norm_sqr_sum(row).sqrt())
            .collect();
        if let Some(k) = atom_norms.iter().position(|&n| n == 0.0) {
            return Err(Error::Config(format!(
                "dictionary atom {k} is identically zero (t1={}, t2={}, df={})",
                lut[k].t1, lut[k].t2, lut[k].df
            )));
        }
        Ok(BlochDictionary {
            atoms,
            atom_norms,
            lut,
            excitation: excitation.clone(),
            infeasible_filtered,
        })
    }

    /// Reassemble a dictionary from stored parts, revalidating the invariants:
    /// consistent sizes, no zero atoms, unique LUT entries, and stored norms
    /// matching recomputed norms to 1e-12 relative.
    pub fn from_parts(
        atoms: Vec<Complex64>,
        atom_norms: Vec<f64>,
        lut: Vec<TissueParams>,
        excitation: ExcitationSequence,
    ) -> Result<Self> {
        let l = excitation.len();
        let p = lut.len();
        if atoms.len() != p * l {
            return Err(Error::DimensionMismatch {
                context: "dictionary atom matrix",
                expected: p * l,
                actual: atoms.len(),
            });
        }
        if atom_norms.len() != p {
            return Err(Error::DimensionMismatch {
                context: "dictionary norm table",
                expected: p,
                actual: atom_norms.len(),
            });
        }
        for k in 0..p {
            let recomputed = crate::types::norm_sqr_sum(&atoms[k * l..(k + 1) * l]).sqrt();
            if recomputed == 0.0 {
                return Err(Error::Config(format!("dictionary atom {k} is identically zero")));
            }
            if (recomputed - atom_norms[k]).abs() > 1e-12 * recomputed {
                return Err(Error::Config(format!(
                    "stored norm of atom {k} ({}) does not match recomputed value ({recomputed})",
                    atom_norms[k]
                )));
            }
        }
        let mut sorted: Vec<&TissueParams> = lut.iter().collect();
        sorted.sort_by(|a, b| {
            (a.t1, a.t2, a.df)
                .partial_cmp(&(b.t1, b.t2, b.df))
                .unwrap()
        });
        if sorted
            .windows(2)
            .any(|w| w[0].t1 == w[1].t1 && w[0].t2 == w[1].t2 && w[0].df == w[1].df)
        {
            return Err(Error::Config("duplicate parameter triple in LUT".into()));
        }
        Ok(BlochDictionary {
            atoms,
            atom_norms,
            lut,
            excitation,
            infeasible_filtered: 0,
        })
    }

    pub fn num_atoms(&self) -> usize {
        self.lut.len()
    }

    pub fn seq_len(&self) -> usize {
        self.excitation.len()
    }

    pub fn atom(&self, k: usize) -> &[Complex64] {
        let l = self.seq_len();
        &self.atoms[k * l..(k + 1) * l]
    }

    pub fn atoms_flat(&self) -> &[Complex64] {
        &self.atoms
    }

    pub fn atom_norms(&self) -> &[f64] {
        &self.atom_norms
    }

    pub fn lut(&self) -> &[TissueParams] {
        &self.lut
    }

    pub fn excitation(&self) -> &ExcitationSequence {
        &self.excitation
    }
}
