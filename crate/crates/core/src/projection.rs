//! Approximate orthogonal projection onto the cone of the discretized
//! response manifold: a normalized matched filter over dictionary atoms with
//! a nonnegativity clamp on the density estimate, plus LUT readout of the
//! matched tissue parameters.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bloch::BlochDictionary;
use crate::error::{Error, Result};
use crate::types::{re_dot, GridDims, ImageSequence};

/// Result of projecting one voxel sequence onto the dictionary cone.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    /// Index of the best-matching atom.
    pub atom_index: usize,
    /// Clamped nonnegative density estimate.
    pub rho: f64,
    /// `rho * atoms[atom_index]`, the projected sequence.
    pub projected: Vec<Complex64>,
}

/// Per-voxel quantitative maps on a spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMaps {
    pub grid: GridDims,
    pub rho: Vec<f64>,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub df: Vec<f64>,
}

impl ParameterMaps {
    pub fn zeros(grid: GridDims) -> Self {
        let n = grid.num_voxels();
        ParameterMaps {
            grid,
            rho: vec![0.0; n],
            t1: vec![0.0; n],
            t2: vec![0.0; n],
            df: vec![0.0; n],
        }
    }

    pub fn num_voxels(&self) -> usize {
        self.grid.num_voxels()
    }
}

/// Winner of a matched-filter scan.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    index: usize,
    score: f64,
    raw: f64,
}

/// Scan a contiguous range of atoms, keeping the highest normalized score.
/// Ties are broken toward the lowest atom index by the strict comparison.
fn scan_range(dict: &BlochDictionary, x: &[Complex64], range: std::ops::Range<usize>) -> Candidate {
    let l = dict.seq_len();
    let norms = dict.atom_norms();
    let atoms = dict.atoms_flat();
    let mut best = Candidate {
        index: range.start,
        score: f64::NEG_INFINITY,
        raw: 0.0,
    };
    for k in range {
        let atom = &atoms[k * l..(k + 1) * l];
        let raw = re_dot(atom, x);
        let score = raw / norms[k];
        if score > best.score {
            best = Candidate {
                index: k,
                score,
                raw,
            };
        }
    }
    best
}

fn finish(dict: &BlochDictionary, cand: Candidate) -> ProjectionResult {
    let norm = dict.atom_norms()[cand.index];
    let rho = (cand.raw / (norm * norm)).max(0.0);
    let projected = dict
        .atom(cand.index)
        .iter()
        .map(|z| Complex64::new(rho * z.re, rho * z.im))
        .collect();
    ProjectionResult {
        atom_index: cand.index,
        rho,
        projected,
    }
}

fn check_len(dict: &BlochDictionary, x: &[Complex64]) -> Result<()> {
    if x.len() != dict.seq_len() {
        return Err(Error::DimensionMismatch {
            context: "voxel sequence vs dictionary",
            expected: dict.seq_len(),
            actual: x.len(),
        });
    }
    if dict.num_atoms() == 0 {
        return Err(Error::Config("dictionary has no atoms".into()));
    }
    Ok(())
}

/// Reference matched filter: one exhaustive sequential scan over all atoms.
pub fn project_voxel_reference(
    x: &[Complex64],
    dict: &BlochDictionary,
) -> Result<ProjectionResult> {
    check_len(dict, x)?;
    Ok(finish(dict, scan_range(dict, x, 0..dict.num_atoms())))
}

/// Matched filter over atom blocks, parallelized across chunks.
///
/// Every per-atom score is computed by the same expression as the reference
/// scan and chunk winners are folded in ascending index order, so the result
/// is bit-identical to [`project_voxel_reference`].
pub fn project_voxel(x: &[Complex64], dict: &BlochDictionary) -> Result<ProjectionResult> {
    check_len(dict, x)?;
    let p = dict.num_atoms();
    const CHUNK: usize = 256;
    if p <= CHUNK {
        return Ok(finish(dict, scan_range(dict, x, 0..p)));
    }
    let starts: Vec<usize> = (0..p).step_by(CHUNK).collect();
    let winners: Vec<Candidate> = starts
        .par_iter()
        .map(|&s| scan_range(dict, x, s..(s + CHUNK).min(p)))
        .collect();
    let mut best = winners[0];
    for cand in &winners[1..] {
        if cand.score > best.score {
            best = *cand;
        }
    }
    Ok(finish(dict, best))
}

/// Detailed image projection: projected sequence, LUT maps, and the selected
/// atom index per voxel.
pub struct ProjectedImage {
    pub sequence: ImageSequence,
    pub maps: ParameterMaps,
    pub atom_indices: Vec<usize>,
}

/// Project every voxel sequence independently and read the matched tissue
/// parameters out of the LUT.
///
/// Voxels are processed in parallel; the result does not depend on the
/// degree of parallelism.
pub fn project_image(
    x: &ImageSequence,
    dict: &BlochDictionary,
) -> Result<(ImageSequence, ParameterMaps)> {
    let det = project_image_detailed(x, dict)?;
    Ok((det.sequence, det.maps))
}

pub fn project_image_detailed(x: &ImageSequence, dict: &BlochDictionary) -> Result<ProjectedImage> {
    if x.num_frames() != dict.seq_len() {
        return Err(Error::DimensionMismatch {
            context: "image sequence vs dictionary",
            expected: dict.seq_len(),
            actual: x.num_frames(),
        });
    }
    let n = x.num_voxels();
    let l = x.num_frames();
    let picks: Vec<Candidate> = (0..n)
        .into_par_iter()
        .map(|i| scan_range(dict, x.row(i), 0..dict.num_atoms()))
        .collect();

    let mut sequence = ImageSequence::zeros(x.grid(), l);
    let mut maps = ParameterMaps::zeros(x.grid());
    let mut atom_indices = Vec::with_capacity(n);
    for (i, cand) in picks.iter().enumerate() {
        let res = finish(dict, *cand);
        sequence.row_mut(i).copy_from_slice(&res.projected);
        let theta = dict.lut()[res.atom_index];
        maps.rho[i] = res.rho;
        maps.t1[i] = theta.t1;
        maps.t2[i] = theta.t2;
        maps.df[i] = theta.df;
        atom_indices.push(res.atom_index);
    }
    Ok(ProjectedImage {
        sequence,
        maps,
        atom_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{random_excitation, BlochDictionary, ParameterGrid};

    fn small_dict() -> BlochDictionary {
        let grid = ParameterGrid::new(
            vec![300.0, 600.0, 900.0, 1500.0],
            vec![40.0, 80.0, 120.0],
            vec![0.0],
        )
        .unwrap();
        let exc = random_excitation(24, 10.0, 10.0, 5).unwrap();
        BlochDictionary::build(&grid, &exc).unwrap()
    }

    #[test]
    fn on_model_voxel_recovers_exactly() {
        let dict = small_dict();
        let x: Vec<Complex64> = dict.atom(7).iter().map(|z| 2.5 * z).collect();
        let res = project_voxel(&x, &dict).unwrap();
        assert_eq!(res.atom_index, 7);
        assert!((res.rho - 2.5).abs() < 1e-12);
        for (p, xi) in res.projected.iter().zip(&x) {
            assert!((p - xi).norm() < 1e-12);
        }
    }

    #[test]
    fn nonpositive_correlation_clamps_to_zero() {
        let dict = small_dict();
        // With zero off-resonance every atom lies on the imaginary axis, so
        // negating an atom makes every real correlation nonpositive.
        let x: Vec<Complex64> = dict.atom(3).iter().map(|z| -z).collect();
        let res = project_voxel(&x, &dict).unwrap();
        assert_eq!(res.rho, 0.0);
        assert!(res.projected.iter().all(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn zero_voxel_maps_to_atom_zero() {
        let dict = small_dict();
        let x = vec![Complex64::ZERO; dict.seq_len()];
        let res = project_voxel(&x, &dict).unwrap();
        assert_eq!(res.atom_index, 0);
        assert_eq!(res.rho, 0.0);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let dict = small_dict();
        let x = vec![Complex64::ZERO; dict.seq_len() + 1];
        assert!(matches!(
            project_voxel(&x, &dict),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn positive_scaling_preserves_argmax() {
        let dict = small_dict();
        let mut x: Vec<Complex64> = dict.atom(5).to_vec();
        // Perturb slightly off-model.
        for (t, z) in x.iter_mut().enumerate() {
            *z += Complex64::new(1e-3 * (t as f64).sin(), -1e-3 * (t as f64).cos());
        }
        let base = project_voxel(&x, &dict).unwrap();
        for c in [0.1, 3.0, 250.0] {
            let scaled: Vec<Complex64> = x.iter().map(|z| c * z).collect();
            let res = project_voxel(&scaled, &dict).unwrap();
            assert_eq!(res.atom_index, base.atom_index);
            assert!((res.rho - c * base.rho).abs() <= 1e-10 * (1.0 + c * base.rho));
        }
    }

    #[test]
    fn projected_is_exactly_rho_times_atom() {
        let dict = small_dict();
        let x: Vec<Complex64> = dict
            .atom(2)
            .iter()
            .enumerate()
            .map(|(t, z)| z + Complex64::new(0.01 * (t as f64 % 3.0), 0.02))
            .collect();
        let res = project_voxel(&x, &dict).unwrap();
        let atom = dict.atom(res.atom_index);
        for (p, a) in res.projected.iter().zip(atom) {
            assert_eq!(p.re, res.rho * a.re);
            assert_eq!(p.im, res.rho * a.im);
        }
    }
}
