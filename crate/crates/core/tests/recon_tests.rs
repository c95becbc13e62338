//! Reconstruction correctness: exact recovery under full sampling, bitwise
//! equivalence of the matched-filter baseline with a single fixed-step
//! iteration, stepsize oracles, and residual monotonicity.

mod common;

use blip_mri::bloch::{random_excitation, BlochDictionary, ParameterGrid};
use blip_mri::recon::{blip, mrf_baseline, rayleigh_stepsize, ReconConfig, StepsizeMode};
use blip_mri::sampling::{
    adjoint, empirical_rip_probe, forward, KSpaceData, SamplingPlan, SubsampledAxis,
};
use blip_mri::types::{norm_sqr_sum, GridDims, ImageSequence};
use blip_mri::Error;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;

fn test_dict(l: usize, seed: u64) -> BlochDictionary {
    let grid = ParameterGrid::new(
        ParameterGrid::axis_from_segments(&[[200.0, 100.0, 1600.0]]).unwrap(),
        ParameterGrid::axis_from_segments(&[[30.0, 25.0, 180.0]]).unwrap(),
        vec![0.0],
    )
    .unwrap();
    let exc = random_excitation(l, 10.0, 10.0, seed).unwrap();
    BlochDictionary::build(&grid, &exc).unwrap()
}

/// Random on-model image: every voxel is a random positive multiple of a
/// random atom, assembled so each row is exactly `rho * atom`.
fn on_model_image(
    dict: &BlochDictionary,
    grid: GridDims,
    seed: u64,
) -> (ImageSequence, Vec<(usize, f64)>) {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let n = grid.num_voxels();
    let l = dict.seq_len();
    let mut img = ImageSequence::zeros(grid, l);
    let mut picks = Vec::with_capacity(n);
    for i in 0..n {
        let k = rng.random_range(0..dict.num_atoms() as u64) as usize;
        let rho = 0.5 + rng.random::<f64>();
        for (slot, a) in img.row_mut(i).iter_mut().zip(dict.atom(k)) {
            *slot = Complex64::new(rho * a.re, rho * a.im);
        }
        picks.push((k, rho));
    }
    (img, picks)
}

fn rel_diff(a: &ImageSequence, b: &ImageSequence) -> f64 {
    let diff: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    diff / b.frob_norm()
}

#[test]
fn full_sampling_one_iteration_recovers_exactly() {
    let dict = test_dict(32, 1);
    let grid = GridDims::OneD(24);
    let (truth, _) = on_model_image(&dict, grid, 44);
    let plan = SamplingPlan::new(1, 32, grid, SubsampledAxis::Rows, 5).unwrap();
    let y = forward(&truth, &plan).unwrap();

    let cfg = ReconConfig {
        max_iters: 1,
        stepsize: StepsizeMode::Fixed(1.0),
        halt_tol: 0.0,
    };
    let res = blip(&y, &dict, &cfg, Some(&truth)).unwrap();
    assert!(
        rel_diff(&res.sequence, &truth) <= 1e-12,
        "one full-sampling iteration should recover the image to machine precision"
    );

    // The recovered point is a fixed point of further iterations.
    let cfg2 = ReconConfig {
        max_iters: 2,
        stepsize: StepsizeMode::Fixed(1.0),
        halt_tol: 0.0,
    };
    let res2 = blip(&y, &dict, &cfg2, None).unwrap();
    assert!(rel_diff(&res2.sequence, &res.sequence) <= 1e-12);
    assert_eq!(res2.trace.records.len(), 2);
}

#[test]
fn baseline_is_bit_identical_to_one_fixed_step_iteration() {
    let dict = test_dict(40, 2);
    let grid = GridDims::TwoD { rows: 8, cols: 4 };
    let (truth, _) = on_model_image(&dict, grid, 9);
    let plan = SamplingPlan::new(4, 40, grid, SubsampledAxis::Rows, 13).unwrap();
    let y = forward(&truth, &plan).unwrap();

    let (base_seq, base_maps) = mrf_baseline(&y, &dict).unwrap();
    let cfg = ReconConfig {
        max_iters: 1,
        stepsize: StepsizeMode::Fixed(plan.n_over_m()),
        halt_tol: 0.0,
    };
    let res = blip(&y, &dict, &cfg, None).unwrap();

    for (a, b) in base_seq.data().iter().zip(res.sequence.data()) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
    for (a, b) in [
        (&base_maps.rho, &res.maps.rho),
        (&base_maps.t1, &res.maps.t1),
        (&base_maps.t2, &res.maps.t2),
        (&base_maps.df, &res.maps.df),
    ] {
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn baseline_recovers_exactly_at_full_sampling() {
    let dict = test_dict(24, 3);
    let grid = GridDims::OneD(16);
    let (truth, picks) = on_model_image(&dict, grid, 21);
    let plan = SamplingPlan::new(1, 24, grid, SubsampledAxis::Rows, 2).unwrap();
    let y = forward(&truth, &plan).unwrap();
    let (seq, maps) = mrf_baseline(&y, &dict).unwrap();
    assert!(rel_diff(&seq, &truth) <= 1e-12);
    for (i, (k, rho)) in picks.iter().enumerate() {
        assert_eq!(maps.t1[i], dict.lut()[*k].t1);
        assert!((maps.rho[i] - rho).abs() <= 1e-12 * rho);
    }
}

#[test]
fn baseline_zero_measurements_give_zero_maps() {
    let dict = test_dict(16, 4);
    let plan = SamplingPlan::new(4, 16, GridDims::OneD(16), SubsampledAxis::Rows, 3).unwrap();
    let zeros = vec![Complex64::ZERO; plan.samples_per_frame() * 16];
    let y = KSpaceData::from_parts(zeros, plan).unwrap();
    let (seq, maps) = mrf_baseline(&y, &dict).unwrap();
    assert!(seq.data().iter().all(|z| z.re == 0.0 && z.im == 0.0));
    assert!(maps.rho.iter().all(|&r| r == 0.0));
}

#[test]
fn every_iterate_lies_on_the_model() {
    let dict = test_dict(24, 5);
    let grid = GridDims::OneD(32);
    let (truth, _) = on_model_image(&dict, grid, 33);
    let plan = SamplingPlan::new(4, 24, grid, SubsampledAxis::Rows, 11).unwrap();
    let y = forward(&truth, &plan).unwrap();
    let res = blip(&y, &dict, &ReconConfig::default(), None).unwrap();

    // Locate each voxel's atom through the LUT and check the row is exactly
    // rho times that atom.
    let lut_index: std::collections::HashMap<(u64, u64, u64), usize> = dict
        .lut()
        .iter()
        .enumerate()
        .map(|(k, p)| ((p.t1.to_bits(), p.t2.to_bits(), p.df.to_bits()), k))
        .collect();
    for i in 0..grid.num_voxels() {
        let key = (
            res.maps.t1[i].to_bits(),
            res.maps.t2[i].to_bits(),
            res.maps.df[i].to_bits(),
        );
        let k = lut_index[&key];
        let rho = res.maps.rho[i];
        for (z, a) in res.sequence.row(i).iter().zip(dict.atom(k)) {
            assert_eq!(z.re.to_bits(), (rho * a.re).to_bits());
            assert_eq!(z.im.to_bits(), (rho * a.im).to_bits());
        }
    }
}

#[test]
fn adaptive_residuals_are_monotone() {
    let dict = test_dict(48, 6);
    let grid = GridDims::OneD(64);
    let (truth, _) = on_model_image(&dict, grid, 50);
    let plan = SamplingPlan::new(8, 48, grid, SubsampledAxis::Rows, 17).unwrap();
    let y = forward(&truth, &plan).unwrap();
    let cfg = ReconConfig {
        max_iters: 25,
        stepsize: StepsizeMode::Adaptive,
        halt_tol: 0.0,
    };
    let res = blip(&y, &dict, &cfg, Some(&truth)).unwrap();
    let y_norm = y.frob_norm();
    let mut prev = y_norm;
    for rec in &res.trace.records {
        assert!(
            rec.residual <= prev + 1e-12 * y_norm,
            "residual increased at iteration {}",
            rec.iteration
        );
        prev = rec.residual;
    }
    assert_eq!(res.trace.records.len(), 25);
}

#[test]
fn rayleigh_stepsize_is_one_at_full_sampling() {
    let dict = test_dict(12, 7);
    let grid = GridDims::OneD(32);
    let plan = SamplingPlan::new(1, 12, grid, SubsampledAxis::Rows, 23).unwrap();
    let g = ImageSequence::from_data(grid, 12, common::random_image_data(32, 12, 61)).unwrap();
    let mu = rayleigh_stepsize(&g, &vec![None; 32], &dict, &plan).unwrap();
    assert!((mu - 1.0).abs() <= 1e-12, "mu = {mu}");
}

#[test]
fn rayleigh_stepsize_matches_dense_oracle_for_spike() {
    let n = 16;
    let l = 8;
    let p = 4;
    let dict = test_dict(l, 8);
    let grid = GridDims::OneD(n);
    let plan = SamplingPlan::new(p, l, grid, SubsampledAxis::Rows, 31).unwrap();
    let mut g = ImageSequence::zeros(grid, l);
    g.row_mut(5)[3] = Complex64::new(1.0, 0.0);
    let mu = rayleigh_stepsize(&g, &vec![None; n], &dict, &plan).unwrap();

    // Dense evaluation of |g|^2 / |h(g)|^2 frame by frame.
    let mut num = 0.0;
    let mut den = 0.0;
    let mut frame = vec![Complex64::ZERO; n];
    for t in 0..l {
        g.gather_frame(t, &mut frame);
        num += norm_sqr_sum(&frame);
        let dense = common::dense_observation_1d(n, p, plan.shifts[t]);
        den += norm_sqr_sum(&common::mat_vec(&dense, &frame));
    }
    let expect = num / den;
    assert!(
        (mu - expect).abs() <= 1e-10 * expect,
        "mu = {mu}, dense oracle = {expect}"
    );
}

#[test]
fn rayleigh_stepsize_stays_in_the_operative_window() {
    // Support-restricted gradients are model-structured, so the Rayleigh
    // quotient lands between the convergence window's lower edge and the
    // near-isometry range's upper edge measured by the probe.
    let l = 64;
    let n = 64;
    let p = 8;
    let dict = test_dict(l, 9);
    let grid = GridDims::OneD(n);
    let plan = SamplingPlan::new(p, l, grid, SubsampledAxis::Rows, 3).unwrap();
    let probe = empirical_rip_probe(&dict, &plan, 400, 55).unwrap();
    let delta = probe.delta_hat;
    assert!(delta < 0.2, "probe delta {delta} too large for the window");
    let n_over_m = plan.n_over_m();
    let lower = 2.0 / 3.0 * n_over_m / (1.0 - delta);
    let upper = n_over_m / (1.0 - delta) * 1.05;

    let mut hits = 0;
    let trials = 50;
    for trial in 0..trials {
        let (model, picks) = on_model_image(&dict, grid, 900 + trial);
        let y = forward(&model, &plan).unwrap();
        let g = adjoint(&y).unwrap();
        let support: Vec<Option<usize>> = picks.iter().map(|(k, _)| Some(*k)).collect();
        let mu = rayleigh_stepsize(&g, &support, &dict, &plan).unwrap();
        if mu > lower && mu < upper {
            hits += 1;
        }
    }
    assert!(
        hits * 10 >= trials * 9,
        "only {hits}/{trials} stepsizes inside ({lower:.3}, {upper:.3})"
    );
}

#[test]
fn runaway_fixed_stepsize_reports_divergence() {
    let dict = test_dict(16, 10);
    let grid = GridDims::OneD(16);
    let (truth, _) = on_model_image(&dict, grid, 70);
    let plan = SamplingPlan::new(4, 16, grid, SubsampledAxis::Rows, 41).unwrap();
    let y = forward(&truth, &plan).unwrap();
    let cfg = ReconConfig {
        max_iters: 300,
        stepsize: StepsizeMode::Fixed(1e100),
        halt_tol: 0.0,
    };
    match blip(&y, &dict, &cfg, None) {
        Err(Error::Divergence { iteration }) => assert!(iteration >= 1),
        other => panic!("expected divergence, got {:?}", other.map(|r| r.trace.records.len())),
    }
}
