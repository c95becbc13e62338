//! Phantom generation and ground-truth synthesis, including the off-grid
//! projection behavior against a brute-force nearest-response search.

mod common;

use blip_mri::bloch::{random_excitation, BlochDictionary, ParameterGrid};
use blip_mri::io::{load_phantom, phantom_from_text, phantom_to_text, save_phantom};
use blip_mri::phantom::{
    default_six_tissues, ground_truth_sequence, PhantomDefinition, PhantomKind,
};
use blip_mri::projection::project_image;
use blip_mri::types::GridDims;
use proptest::prelude::*;

#[test]
fn file_round_trip_through_disk() {
    let ph = PhantomDefinition::synth(
        PhantomKind::Concentric,
        GridDims::TwoD { rows: 16, cols: 16 },
        default_six_tissues(),
        0,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phantom.txt");
    save_phantom(&ph, &path).unwrap();
    let loaded = load_phantom(&path).unwrap();
    assert_eq!(loaded, ph);
}

#[test]
fn off_grid_voxels_project_to_nearest_response_atoms() {
    // Ground-truth tissues sit off the dictionary grid; projecting the clean
    // sequence must pick, per voxel, exactly the atom a brute-force
    // nearest-response scan picks, and the parameter error stays within the
    // local grid quantization half-step.
    let grid = ParameterGrid::default_grid();
    let exc = random_excitation(64, 10.0, 10.0, 12).unwrap();
    let dict = BlochDictionary::build(&grid, &exc).unwrap();

    let ph = PhantomDefinition::synth(
        PhantomKind::Blocks,
        GridDims::OneD(12),
        default_six_tissues(),
        0,
    )
    .unwrap();
    let (seq, truth_maps) = ground_truth_sequence(&ph, &exc).unwrap();
    let (_, est_maps) = project_image(&seq, &dict).unwrap();

    for i in 0..12 {
        let (bf_k, _) = common::brute_force_cone_projection(seq.row(i), &dict);
        let theta = dict.lut()[bf_k];
        assert_eq!(est_maps.t1[i], theta.t1, "voxel {i} picked a different atom");
        assert_eq!(est_maps.t2[i], theta.t2);

        // Analytic nearest-grid distance bounds from the grid spec.
        let half = |vals: &[f64], v: f64| -> f64 {
            let nearest = vals
                .iter()
                .cloned()
                .min_by(|a, b| (a - v).abs().partial_cmp(&(b - v).abs()).unwrap())
                .unwrap();
            (nearest - v).abs()
        };
        let t1_q = half(&grid.t1_values, truth_maps.t1[i]);
        let t2_q = half(&grid.t2_values, truth_maps.t2[i]);
        assert!(
            (est_maps.t1[i] - truth_maps.t1[i]).abs() <= t1_q + 1e-9,
            "voxel {i}: t1 error {} beyond quantization {t1_q}",
            (est_maps.t1[i] - truth_maps.t1[i]).abs()
        );
        assert!(
            (est_maps.t2[i] - truth_maps.t2[i]).abs() <= t2_q + 1e-9,
            "voxel {i}: t2 error {} beyond quantization {t2_q}",
            (est_maps.t2[i] - truth_maps.t2[i]).abs()
        );
    }
}

#[test]
fn synth_rejects_grids_too_small_for_the_tissue_table() {
    let err = PhantomDefinition::synth(
        PhantomKind::Blocks,
        GridDims::OneD(3),
        default_six_tissues(),
        0,
    );
    assert!(err.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn label_map_text_round_trips(rows in 1usize..12, cols in 1usize..12, k in 1usize..5) {
        prop_assume!(rows * cols >= k);
        let tissues: Vec<_> = default_six_tissues().into_iter().take(k).collect();
        let ph = PhantomDefinition::synth(
            PhantomKind::Blocks,
            GridDims::TwoD { rows, cols },
            tissues,
            0,
        );
        prop_assume!(ph.is_ok());
        let ph = ph.unwrap();
        let text = phantom_to_text(&ph);
        let loaded = phantom_from_text(&text).unwrap();
        prop_assert_eq!(loaded, ph);
    }
}
