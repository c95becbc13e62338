//! Iterated-projection reconstruction (projected Landweber recursion with
//! the dictionary-cone projector) and the single-pass matched-filter
//! baseline it generalizes.
//!
//! The recursion from a zero initial iterate is
//! `X <- P[X + mu * h^H(Y - h(X))]`, where `P` projects each voxel sequence
//! onto the dictionary cone. One iteration with `mu = N/M` reproduces the
//! matched-filter baseline exactly.

use num_complex::Complex64;

use crate::analysis::ser_db;
use crate::bloch::BlochDictionary;
use crate::error::{Error, Result};
use crate::projection::{project_image_detailed, ParameterMaps};
use crate::sampling::{adjoint_raw, forward, KSpaceData, SamplingPlan};
use crate::types::{norm_sqr_sum, re_dot, ImageSequence};

/// How the Landweber stepsize is chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsizeMode {
    /// Constant stepsize. `N/M` is the natural choice for this operator.
    Fixed(f64),
    /// Rayleigh-quotient stepsize on the current model support, halved until
    /// the post-projection residual does not increase.
    Adaptive,
}

/// Reconstruction controls. Deterministic given the inputs; no seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconConfig {
    pub max_iters: usize,
    pub stepsize: StepsizeMode,
    /// Stop when the relative change of the residual norm falls below this.
    pub halt_tol: f64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            max_iters: 300,
            stepsize: StepsizeMode::Adaptive,
            halt_tol: 1e-6,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if let StepsizeMode::Fixed(mu) = self.stepsize {
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(Error::Config(format!(
                    "fixed stepsize must be positive and finite, got {mu}"
                )));
            }
        }
        if !(self.halt_tol >= 0.0) {
            return Err(Error::Config(format!(
                "halt_tol must be nonnegative, got {}",
                self.halt_tol
            )));
        }
        Ok(())
    }
}

/// One executed iteration of the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|Y - h(X)|` after this iteration's projection.
    pub residual: f64,
    /// Accepted stepsize.
    pub stepsize: f64,
    /// Image-sequence SER against the ground truth, when one was supplied.
    pub ser_db: Option<f64>,
}

/// Per-iteration history of a reconstruction run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReconTrace {
    pub records: Vec<IterationRecord>,
}

/// Output of a reconstruction run.
pub struct ReconResult {
    pub sequence: ImageSequence,
    pub maps: ParameterMaps,
    pub trace: ReconTrace,
}

fn check_shapes(y: &KSpaceData, dict: &BlochDictionary) -> Result<()> {
    if dict.seq_len() != y.plan().num_frames() {
        return Err(Error::DimensionMismatch {
            context: "dictionary length vs measurements",
            expected: y.plan().num_frames(),
            actual: dict.seq_len(),
        });
    }
    Ok(())
}

fn residual_samples(y: &KSpaceData, fwd: &KSpaceData) -> Vec<Complex64> {
    y.samples()
        .iter()
        .zip(fwd.samples())
        .map(|(a, b)| a - b)
        .collect()
}

/// State produced by one candidate step evaluation.
struct StepCandidate {
    sequence: ImageSequence,
    maps: ParameterMaps,
    support: Vec<Option<usize>>,
    residual_vec: Vec<Complex64>,
    residual: f64,
}

/// Rayleigh-quotient stepsize `|g~|^2 / |h(g~)|^2`, where `g~` restricts the
/// gradient image to the current model support: voxels with a selected atom
/// keep only their component along that atom, zero voxels keep the raw
/// gradient row.
///
/// Falls back to `N/M` when the restricted gradient vanishes or lies in the
/// null space of the observation map.
pub fn rayleigh_stepsize(
    gradient: &ImageSequence,
    support: &[Option<usize>],
    dict: &BlochDictionary,
    plan: &SamplingPlan,
) -> Result<f64> {
    if support.len() != gradient.num_voxels() {
        return Err(Error::DimensionMismatch {
            context: "support vs gradient voxels",
            expected: gradient.num_voxels(),
            actual: support.len(),
        });
    }
    if norm_sqr_sum(gradient.data()) == 0.0 {
        return Err(Error::Config(
            "adaptive stepsize is undefined for a zero gradient".into(),
        ));
    }
    let l = gradient.num_frames();
    let mut restricted = ImageSequence::zeros(gradient.grid(), l);
    for (i, slot) in support.iter().enumerate() {
        let row = gradient.row(i);
        let out = restricted.row_mut(i);
        match *slot {
            Some(k) => {
                let atom = dict.atom(k);
                let norm = dict.atom_norms()[k];
                let coeff = re_dot(atom, row) / (norm * norm);
                for (o, a) in out.iter_mut().zip(atom) {
                    *o = Complex64::new(coeff * a.re, coeff * a.im);
                }
            }
            None => out.copy_from_slice(row),
        }
    }
    let num = norm_sqr_sum(restricted.data());
    if num == 0.0 {
        return Ok(plan.n_over_m());
    }
    let den = norm_sqr_sum(forward(&restricted, plan)?.samples());
    if den == 0.0 {
        return Ok(plan.n_over_m());
    }
    Ok(num / den)
}

/// Halve `mu` until `eval(mu)` does not exceed `resid_prev` (plus a
/// roundoff allowance on the measurement scale), or fail once it drops
/// below `mu_min`. `eval` returns the post-projection residual norm.
fn backtrack(
    iteration: usize,
    mut mu: f64,
    mu_min: f64,
    resid_prev: f64,
    slack: f64,
    mut eval: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    loop {
        let resid = eval(mu)?;
        if resid <= resid_prev + slack {
            return Ok(mu);
        }
        mu *= 0.5;
        if mu < mu_min {
            return Err(Error::StepsizeUnderflow {
                iteration,
                mu,
                mu_min,
            });
        }
    }
}

/// Run the iterated-projection reconstruction from a zero initial iterate.
///
/// Stops at `max_iters` or when the relative residual change drops below
/// `halt_tol`. Returns the final on-model sequence, the LUT parameter maps,
/// and the per-iteration trace.
pub fn blip(
    y: &KSpaceData,
    dict: &BlochDictionary,
    cfg: &ReconConfig,
    ground_truth: Option<&ImageSequence>,
) -> Result<ReconResult> {
    cfg.validate()?;
    check_shapes(y, dict)?;
    let plan = y.plan();
    let n = plan.grid.num_voxels();
    let l = plan.num_frames();
    let n_over_m = plan.n_over_m();
    let mu_min = 1e-8 * n_over_m;

    let mut x = ImageSequence::zeros(plan.grid, l);
    let mut maps = ParameterMaps::zeros(plan.grid);
    let mut support: Vec<Option<usize>> = vec![None; n];
    let mut trace = ReconTrace::default();

    // Residual of the zero iterate is the data itself.
    let mut resid_vec = y.samples().to_vec();
    let mut resid_prev = norm_sqr_sum(&resid_vec).sqrt();
    // Roundoff allowance for the backtracking acceptance test: once the
    // residual reaches the float noise floor of the data it cannot shrink,
    // and a 1-ulp rise must not be treated as an increase.
    let accept_slack = 1e-12 * resid_prev;

    for iteration in 1..=cfg.max_iters {
        let gradient = adjoint_raw(&resid_vec, plan)?;

        // One candidate evaluation at stepsize mu; retains the accepted state.
        let mut accepted: Option<StepCandidate> = None;
        let mut try_step = |mu: f64| -> Result<f64> {
            let updated = x.add_scaled(mu, &gradient)?;
            let det = project_image_detailed(&updated, dict)?;
            let fwd = forward(&det.sequence, plan)?;
            let residual_vec = residual_samples(y, &fwd);
            let residual = norm_sqr_sum(&residual_vec).sqrt();
            let support = det
                .atom_indices
                .iter()
                .zip(&det.maps.rho)
                .map(|(&k, &rho)| if rho > 0.0 { Some(k) } else { None })
                .collect();
            accepted = Some(StepCandidate {
                sequence: det.sequence,
                maps: det.maps,
                support,
                residual_vec,
                residual,
            });
            Ok(residual)
        };

        let mu = match cfg.stepsize {
            StepsizeMode::Fixed(mu) => {
                try_step(mu)?;
                mu
            }
            StepsizeMode::Adaptive => {
                let mu0 = match rayleigh_stepsize(&gradient, &support, dict, plan) {
                    Ok(mu) => mu,
                    // A zero gradient means the residual is already in the
                    // null space of the adjoint; nothing can improve.
                    Err(Error::Config(_)) => n_over_m,
                    Err(e) => return Err(e),
                };
                backtrack(iteration, mu0, mu_min, resid_prev, accept_slack, &mut try_step)?
            }
        };

        let cand = accepted.expect("candidate evaluated");
        if !cand.residual.is_finite() || !cand.sequence.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        x = cand.sequence;
        maps = cand.maps;
        support = cand.support;
        resid_vec = cand.residual_vec;
        let resid = cand.residual;

        let ser = match ground_truth {
            Some(truth) => Some(ser_db(truth, &x)?),
            None => None,
        };
        trace.records.push(IterationRecord {
            iteration,
            residual: resid,
            stepsize: mu,
            ser_db: ser,
        });

        let change = (resid_prev - resid).abs() / resid_prev.max(f64::MIN_POSITIVE);
        resid_prev = resid;
        if change < cfg.halt_tol {
            break;
        }
    }

    Ok(ReconResult {
        sequence: x,
        maps,
        trace,
    })
}

/// Matched-filter baseline: back-project the measurements, scale by `N/M`,
/// and project each voxel sequence onto the dictionary cone once.
///
/// Equivalent to a single iteration of [`blip`] with fixed stepsize `N/M`
/// from a zero iterate.
pub fn mrf_baseline(
    y: &KSpaceData,
    dict: &BlochDictionary,
) -> Result<(ImageSequence, ParameterMaps)> {
    check_shapes(y, dict)?;
    let back = adjoint_raw(y.samples(), y.plan())?;
    let zero = ImageSequence::zeros(y.plan().grid, y.plan().num_frames());
    let scaled = zero.add_scaled(y.plan().n_over_m(), &back)?;
    let det = project_image_detailed(&scaled, dict)?;
    if !det.sequence.is_finite() {
        return Err(Error::Divergence { iteration: 1 });
    }
    Ok((det.sequence, det.maps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ReconConfig {
            max_iters: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ReconConfig {
            stepsize: StepsizeMode::Fixed(0.0),
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ReconConfig {
            halt_tol: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ReconConfig::default().validate().is_ok());
    }

    #[test]
    fn backtracking_accepts_non_increasing_residual() {
        let mu = backtrack(1, 8.0, 1e-8, 1.0, 0.0, |mu| {
            Ok(if mu > 2.5 { 2.0 } else { 0.5 })
        })
        .unwrap();
        assert_eq!(mu, 2.0);
    }

    #[test]
    fn backtracking_underflows_on_persistent_increase() {
        let err = backtrack(3, 8.0, 1e-3, 1.0, 0.0, |_| Ok(2.0)).unwrap_err();
        match err {
            Error::StepsizeUnderflow { iteration, .. } => assert_eq!(iteration, 3),
            other => panic!("expected stepsize underflow, got {other:?}"),
        }
    }
}
