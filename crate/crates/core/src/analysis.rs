//! Quality metrics and empirical probes: image-sequence SER, parameter-map
//! error summaries, chord flatness, and the length-versus-undersampling
//! scaling study.

use rayon::prelude::*;

use crate::bloch::{random_excitation, BlochDictionary, ParameterGrid};
use crate::error::{Error, Result};
use crate::phantom::{ground_truth_sequence, PhantomDefinition};
use crate::projection::ParameterMaps;
use crate::recon::{blip, ReconConfig};
use crate::sampling::{forward, SamplingPlan, SubsampledAxis};
use crate::types::ImageSequence;

/// SER clamp for exact (or numerically exact) recovery.
pub const SER_CLAMP_DB: f64 = 300.0;

/// Image-sequence signal-to-error ratio in dB:
/// `20 log10(|X|_F / |X - Xhat|_F)`, clamped at +300 dB.
pub fn ser_db(truth: &ImageSequence, estimate: &ImageSequence) -> Result<f64> {
    if truth.grid() != estimate.grid() || truth.num_frames() != estimate.num_frames() {
        return Err(Error::DimensionMismatch {
            context: "SER operands",
            expected: truth.data().len(),
            actual: estimate.data().len(),
        });
    }
    let signal = truth.frob_norm();
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let err: f64 = truth
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if err == 0.0 {
        return Ok(SER_CLAMP_DB);
    }
    Ok((20.0 * (signal / err).log10()).min(SER_CLAMP_DB))
}

/// Estimated chord flatness of a dictionary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatnessReport {
    /// `max |u|_inf / |u|_2` over the sampled chords; in `[L^{-1/2}, 1]`.
    pub lambda: f64,
    /// `lambda^{-2} / L`, the quantity whose stability across `L` indicates
    /// that energy keeps spreading over the sequence.
    pub lambda_inv_sq_over_l: f64,
    pub num_chords: usize,
    pub seed: u64,
}

/// Estimate chord flatness by Monte-Carlo over dictionary chords
/// `u = rho1 * D_k1 - rho2 * D_k2`, including single-atom rays (`rho2 = 0`).
/// Chords with numerically zero norm are skipped.
pub fn flatness(dict: &BlochDictionary, num_chords: usize, seed: u64) -> Result<FlatnessReport> {
    use rand::Rng;
    use rand::SeedableRng;

    if num_chords == 0 {
        return Err(Error::Config("flatness needs at least one chord".into()));
    }
    let l = dict.seq_len();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut lambda: f64 = 0.0;
    let mut used = 0usize;
    for _ in 0..num_chords {
        let k1 = rng.random_range(0..dict.num_atoms() as u64) as usize;
        let k2 = rng.random_range(0..dict.num_atoms() as u64) as usize;
        let rho1 = 0.25 + 1.75 * rng.random::<f64>();
        let rho2 = if rng.random::<f64>() < 0.25 {
            0.0
        } else {
            0.25 + 1.75 * rng.random::<f64>()
        };
        let a1 = dict.atom(k1);
        let a2 = dict.atom(k2);
        let mut max_sq = 0.0f64;
        let mut sum_sq = 0.0f64;
        for t in 0..l {
            let u = rho1 * a1[t] - rho2 * a2[t];
            let sq = u.norm_sqr();
            max_sq = max_sq.max(sq);
            sum_sq += sq;
        }
        let scale = rho1 * dict.atom_norms()[k1] + rho2 * dict.atom_norms()[k2];
        if sum_sq.sqrt() <= 1e-12 * scale {
            continue;
        }
        lambda = lambda.max((max_sq / sum_sq).sqrt());
        used += 1;
    }
    if used == 0 {
        return Err(Error::DegenerateSampling);
    }
    Ok(FlatnessReport {
        lambda,
        lambda_inv_sq_over_l: 1.0 / (lambda * lambda * l as f64),
        num_chords: used,
        seed,
    })
}

/// Median / mean / max of one error population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

fn stats(mut errs: Vec<f64>) -> ErrorStats {
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = errs.len();
    let median = if n % 2 == 1 {
        errs[n / 2]
    } else {
        0.5 * (errs[n / 2 - 1] + errs[n / 2])
    };
    ErrorStats {
        median,
        mean: errs.iter().sum::<f64>() / n as f64,
        max: *errs.last().unwrap(),
    }
}

/// Parameter-map error summary over the `rho > 0` mask. Densities and
/// relaxation times are compared relatively; off-resonance absolutely (Hz),
/// since its true value may be zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapErrorSummary {
    pub rho: ErrorStats,
    pub t1: ErrorStats,
    pub t2: ErrorStats,
    pub df_abs: ErrorStats,
    pub masked_voxels: usize,
}

pub fn map_errors(truth: &ParameterMaps, estimate: &ParameterMaps) -> Result<MapErrorSummary> {
    if truth.grid != estimate.grid {
        return Err(Error::DimensionMismatch {
            context: "parameter map grids",
            expected: truth.num_voxels(),
            actual: estimate.num_voxels(),
        });
    }
    let mask: Vec<usize> = (0..truth.num_voxels())
        .filter(|&i| truth.rho[i] > 0.0)
        .collect();
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let rel = |tru: &[f64], est: &[f64]| -> Vec<f64> {
        mask.iter()
            .map(|&i| (est[i] - tru[i]).abs() / tru[i].abs())
            .collect()
    };
    let abs = |tru: &[f64], est: &[f64]| -> Vec<f64> {
        mask.iter().map(|&i| (est[i] - tru[i]).abs()).collect()
    };
    Ok(MapErrorSummary {
        rho: stats(rel(&truth.rho, &estimate.rho)),
        t1: stats(rel(&truth.t1, &estimate.t1)),
        t2: stats(rel(&truth.t2, &estimate.t2)),
        df_abs: stats(abs(&truth.df, &estimate.df)),
        masked_voxels: mask.len(),
    })
}

/// Inputs for the scaling study over sequence length and undersampling.
#[derive(Debug, Clone)]
pub struct StudySpec {
    pub l_values: Vec<usize>,
    pub p_values: Vec<usize>,
    pub trials: usize,
    /// SER threshold defining the recovery transition, in dB.
    pub ser_threshold_db: f64,
    pub phantom: PhantomDefinition,
    pub grid: ParameterGrid,
    pub flip_std_deg: f64,
    pub tr_ms: f64,
    pub axis: SubsampledAxis,
    pub recon: ReconConfig,
    pub master_seed: u64,
}

/// One (L, p) cell of the study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyCell {
    pub l: usize,
    pub p: usize,
    pub l_over_p2: f64,
    /// Mean SER over successful trials, dB. NaN when every trial failed.
    pub mean_ser_db: f64,
    pub trials_ok: usize,
    pub trials_failed: usize,
    /// Error strings of failed trials, in trial order.
    pub failures: Vec<String>,
}

/// Study output: all cells plus, per undersampling factor, the smallest
/// `L/p^2` whose mean SER reached the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub cells: Vec<StudyCell>,
    pub transitions: Vec<(usize, Option<f64>)>,
    pub ser_threshold_db: f64,
}

/// Deterministic per-cell seed derived from the master seed and the cell
/// coordinates, so the study is schedule-independent.
pub fn cell_seed(master: u64, l: usize, p: usize, trial: usize, stream: u64) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for part in [master, l as u64, p as u64, trial as u64, stream] {
        for b in part.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

fn run_study_trial(spec: &StudySpec, l: usize, p: usize, trial: usize) -> Result<f64> {
    let excitation = random_excitation(
        l,
        spec.flip_std_deg,
        spec.tr_ms,
        cell_seed(spec.master_seed, l, p, trial, 1),
    )?;
    let dict = BlochDictionary::build(&spec.grid, &excitation)?;
    let (truth, _) = ground_truth_sequence(&spec.phantom, &excitation)?;
    let plan = SamplingPlan::new(
        p,
        l,
        spec.phantom.grid,
        spec.axis,
        cell_seed(spec.master_seed, l, p, trial, 2),
    )?;
    let y = forward(&truth, &plan)?;
    let result = blip(&y, &dict, &spec.recon, Some(&truth))?;
    ser_db(&truth, &result.sequence)
}

/// Run the full study grid. Cells are independent and evaluated in
/// parallel; every cell derives its own seeds, so results do not depend on
/// scheduling.
pub fn scaling_study(spec: &StudySpec) -> Result<StudyReport> {
    if spec.l_values.is_empty() || spec.p_values.is_empty() {
        return Err(Error::Config("study needs at least one L and one p".into()));
    }
    if spec.trials == 0 {
        return Err(Error::Config("study needs at least one trial".into()));
    }
    spec.recon.validate()?;
    spec.phantom.validate()?;
    let mut coords = Vec::new();
    for &p in &spec.p_values {
        for &l in &spec.l_values {
            coords.push((l, p));
        }
    }
    let cells: Vec<StudyCell> = coords
        .par_iter()
        .map(|&(l, p)| {
            let mut sers = Vec::new();
            let mut failures = Vec::new();
            for trial in 0..spec.trials {
                match run_study_trial(spec, l, p, trial) {
                    Ok(ser) => sers.push(ser),
                    Err(e) => failures.push(e.to_string()),
                }
            }
            let mean = if sers.is_empty() {
                f64::NAN
            } else {
                sers.iter().sum::<f64>() / sers.len() as f64
            };
            StudyCell {
                l,
                p,
                l_over_p2: l as f64 / (p * p) as f64,
                mean_ser_db: mean,
                trials_ok: sers.len(),
                trials_failed: failures.len(),
                failures,
            }
        })
        .collect();

    let mut transitions = Vec::new();
    for &p in &spec.p_values {
        let mut best: Option<f64> = None;
        for cell in cells.iter().filter(|c| c.p == p) {
            if cell.mean_ser_db >= spec.ser_threshold_db {
                best = Some(match best {
                    Some(b) => b.min(cell.l_over_p2),
                    None => cell.l_over_p2,
                });
            }
        }
        transitions.push((p, best));
    }
    Ok(StudyReport {
        cells,
        transitions,
        ser_threshold_db: spec.ser_threshold_db,
    })
}
