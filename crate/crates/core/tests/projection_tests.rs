//! Matched-filter projection: equivalence of the blocked and reference
//! scans, distance optimality against a brute-force oracle, idempotence,
//! and order-independence of the image-level operation.

mod common;

use blip_mri::bloch::{random_excitation, BlochDictionary, ParameterGrid};
use blip_mri::projection::{
    project_image, project_image_detailed, project_voxel, project_voxel_reference,
};
use blip_mri::types::{GridDims, ImageSequence};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;

fn test_dict(l: usize, seed: u64) -> BlochDictionary {
    let grid = ParameterGrid::new(
        ParameterGrid::axis_from_segments(&[[200.0, 100.0, 1500.0]]).unwrap(),
        ParameterGrid::axis_from_segments(&[[30.0, 20.0, 190.0]]).unwrap(),
        vec![0.0, 25.0],
    )
    .unwrap();
    let exc = random_excitation(l, 10.0, 10.0, seed).unwrap();
    BlochDictionary::build(&grid, &exc).unwrap()
}

fn random_voxel(l: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..l)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

#[test]
fn blocked_scan_is_bit_identical_to_reference() {
    let dict = test_dict(40, 17);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4242);
    for _ in 0..1000 {
        let x = random_voxel(dict.seq_len(), &mut rng);
        let fast = project_voxel(&x, &dict).unwrap();
        let slow = project_voxel_reference(&x, &dict).unwrap();
        assert_eq!(fast.atom_index, slow.atom_index);
        assert_eq!(fast.rho.to_bits(), slow.rho.to_bits());
        assert_eq!(fast.projected, slow.projected);
    }
}

#[test]
fn perturbed_on_model_voxel_matches_brute_force() {
    let dict = test_dict(48, 3);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
    for _ in 0..200 {
        let k = rng.random_range(0..dict.num_atoms() as u64) as usize;
        let rho = 0.5 + 2.0 * rng.random::<f64>();
        let noise = 1e-4;
        let x: Vec<Complex64> = dict
            .atom(k)
            .iter()
            .map(|z| {
                rho * z
                    + Complex64::new(
                        noise * (rng.random::<f64>() - 0.5),
                        noise * (rng.random::<f64>() - 0.5),
                    )
            })
            .collect();
        let res = project_voxel(&x, &dict).unwrap();
        let (bf_k, bf_rho) = common::brute_force_cone_projection(&x, &dict);
        assert_eq!(res.atom_index, bf_k);
        assert!((res.rho - bf_rho).abs() <= 1e-12 * (1.0 + bf_rho));
    }
}

#[test]
fn projection_minimizes_distance_over_sampled_cone_points() {
    let dict = test_dict(32, 11);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
    for _ in 0..50 {
        let x = random_voxel(dict.seq_len(), &mut rng);
        let res = project_voxel(&x, &dict).unwrap();
        let dist = |v: &[Complex64]| -> f64 {
            x.iter().zip(v).map(|(a, b)| (a - b).norm_sqr()).sum()
        };
        let d_star = dist(&res.projected);
        for _ in 0..100 {
            let k = rng.random_range(0..dict.num_atoms() as u64) as usize;
            let rho = 3.0 * rng.random::<f64>();
            let candidate: Vec<Complex64> = dict.atom(k).iter().map(|z| rho * z).collect();
            assert!(
                d_star <= dist(&candidate) + 1e-10,
                "projection is farther than rho={rho} times atom {k}"
            );
        }
    }
}

#[test]
fn image_projection_is_idempotent() {
    let dict = test_dict(24, 23);
    let n = 16;
    let data = common::random_image_data(n, dict.seq_len(), 88);
    let x = ImageSequence::from_data(GridDims::OneD(n), dict.seq_len(), data).unwrap();
    let (p1, maps1) = project_image(&x, &dict).unwrap();
    let (p2, maps2) = project_image(&p1, &dict).unwrap();
    for i in 0..n {
        for (a, b) in p1.row(i).iter().zip(p2.row(i)) {
            assert!(
                (a - b).norm() <= 1e-13 * (1.0 + a.norm()),
                "voxel {i} moved on re-projection"
            );
        }
    }
    assert_eq!(maps1.t1, maps2.t1);
    assert_eq!(maps1.t2, maps2.t2);
    for (r1, r2) in maps1.rho.iter().zip(&maps2.rho) {
        assert!((r1 - r2).abs() <= 1e-13 * (1.0 + r1));
    }
}

#[test]
fn image_projection_equals_sequential_voxel_loop() {
    let dict = test_dict(20, 31);
    let n = 16;
    let data = common::random_image_data(n, dict.seq_len(), 3);
    let x = ImageSequence::from_data(GridDims::OneD(n), dict.seq_len(), data).unwrap();
    let det = project_image_detailed(&x, &dict).unwrap();
    for i in 0..n {
        let single = project_voxel_reference(x.row(i), &dict).unwrap();
        assert_eq!(det.atom_indices[i], single.atom_index);
        assert_eq!(det.maps.rho[i].to_bits(), single.rho.to_bits());
        assert_eq!(det.sequence.row(i), &single.projected[..]);
    }
}

#[test]
fn image_projection_is_thread_count_independent() {
    let dict = test_dict(20, 31);
    let n = 64;
    let data = common::random_image_data(n, dict.seq_len(), 12);
    let x = ImageSequence::from_data(GridDims::OneD(n), dict.seq_len(), data).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| project_image(&x, &dict).unwrap());
    let multi = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .unwrap()
        .install(|| project_image(&x, &dict).unwrap());
    assert_eq!(single.0.data(), multi.0.data());
    assert_eq!(single.1.rho, multi.1.rho);
}

#[test]
fn zero_image_projects_to_zero_maps() {
    let dict = test_dict(16, 2);
    let x = ImageSequence::zeros(GridDims::OneD(8), dict.seq_len());
    let (seq, maps) = project_image(&x, &dict).unwrap();
    assert!(seq.data().iter().all(|z| z.re == 0.0 && z.im == 0.0));
    assert!(maps.rho.iter().all(|&r| r == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scale_covariance_holds_for_random_voxels(seed in 0u64..5000, c in 1e-3f64..1e3) {
        let dict = test_dict(12, 1);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let x = random_voxel(dict.seq_len(), &mut rng);
        let base = project_voxel(&x, &dict).unwrap();
        let scaled: Vec<Complex64> = x.iter().map(|z| c * z).collect();
        let res = project_voxel(&scaled, &dict).unwrap();
        prop_assert_eq!(res.atom_index, base.atom_index);
        prop_assert!((res.rho - c * base.rho).abs() <= 1e-9 * (1.0 + c * base.rho));
    }
}
