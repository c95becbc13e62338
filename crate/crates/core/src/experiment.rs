//! End-to-end experiment pipelines: deterministic single runs, scaling
//! studies, flatness sweeps, and standalone dictionary / phantom artifact
//! generation. Every output is a pure function of the validated config.

use std::fs;
use std::path::Path;

use crate::analysis::{flatness, map_errors, scaling_study, ser_db, MapErrorSummary, StudyReport};
use crate::bloch::{random_excitation, BlochDictionary};
use crate::config::{derived_seed, ValidatedConfig};
use crate::error::Result;
use crate::io;
use crate::phantom::ground_truth_sequence;
use crate::projection::ParameterMaps;
use crate::recon::{blip, mrf_baseline};
use crate::sampling::{forward, SamplingPlan};

/// Outcome of a single reconstruction run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config_hash: u64,
    pub ser_blip_db: f64,
    pub ser_mrf_db: f64,
    pub blip_iterations: usize,
    pub final_residual: f64,
    pub num_atoms: usize,
    pub infeasible_filtered: usize,
    pub errors_blip: MapErrorSummary,
    pub errors_mrf: MapErrorSummary,
}

fn write_map_set(
    dir: &Path,
    prefix: &str,
    maps: &ParameterMaps,
    config_hash: u64,
) -> Result<()> {
    io::save_maps(maps, config_hash, &dir.join(format!("{prefix}.maps")))?;
    fs::write(
        dir.join(format!("{prefix}_maps.txt")),
        io::maps_to_text(maps, config_hash),
    )?;
    for (param, values, window) in [
        ("rho", &maps.rho, io::PGM_WINDOW_RHO),
        ("t1", &maps.t1, io::PGM_WINDOW_T1),
        ("t2", &maps.t2, io::PGM_WINDOW_T2),
        ("df", &maps.df, io::PGM_WINDOW_DF),
    ] {
        let pgm = io::map_to_pgm(values, maps.grid, window)?;
        fs::write(dir.join(format!("{prefix}_{param}.pgm")), pgm)?;
    }
    Ok(())
}

fn error_lines(prefix: &str, s: &MapErrorSummary) -> String {
    let mut out = String::new();
    for (name, st) in [
        ("rho_rel", s.rho),
        ("t1_rel", s.t1),
        ("t2_rel", s.t2),
        ("df_abs_hz", s.df_abs),
    ] {
        out.push_str(&format!(
            "{prefix}_{name} median {} mean {} max {}\n",
            st.median, st.mean, st.max
        ));
    }
    out
}

/// Execute a single run: synthesize, sample, reconstruct with both the
/// iterated projection and the matched-filter baseline, and write all
/// artifacts under `out_dir`. Reruns with the same config are byte-identical.
pub fn run_single(cfg: &ValidatedConfig, out_dir: &Path) -> Result<RunSummary> {
    let exc = random_excitation(
        cfg.excitation.length,
        cfg.excitation.flip_std_deg,
        cfg.excitation.tr_ms,
        cfg.excitation.seed,
    )?;
    let dict = BlochDictionary::build(&cfg.grid, &exc)?;
    let (truth_seq, truth_maps) = ground_truth_sequence(&cfg.phantom, &exc)?;
    let plan = SamplingPlan::new(
        cfg.sampling.p,
        exc.len(),
        cfg.phantom.grid,
        cfg.sampling.axis,
        cfg.sampling.seed,
    )?;
    let y = forward(&truth_seq, &plan)?;

    let recon_cfg = cfg.recon_for_plan(plan.n_over_m());
    let blip_res = blip(&y, &dict, &recon_cfg, Some(&truth_seq))?;
    let (mrf_seq, mrf_maps) = mrf_baseline(&y, &dict)?;

    let ser_blip_db = ser_db(&truth_seq, &blip_res.sequence)?;
    let ser_mrf_db = ser_db(&truth_seq, &mrf_seq)?;
    let errors_blip = map_errors(&truth_maps, &blip_res.maps)?;
    let errors_mrf = map_errors(&truth_maps, &mrf_maps)?;
    let final_residual = blip_res
        .trace
        .records
        .last()
        .map(|r| r.residual)
        .unwrap_or(f64::NAN);

    fs::create_dir_all(out_dir)?;
    let hash = cfg.config_hash;
    io::save_phantom(&cfg.phantom, &out_dir.join("phantom.txt"))?;
    fs::write(out_dir.join("plan.txt"), io::plan_to_text(&plan))?;
    write_map_set(out_dir, "truth", &truth_maps, hash)?;
    write_map_set(out_dir, "blip", &blip_res.maps, hash)?;
    write_map_set(out_dir, "mrf", &mrf_maps, hash)?;
    fs::write(
        out_dir.join("blip_trace.tsv"),
        io::trace_to_tsv(&blip_res.trace, hash),
    )?;

    let summary = RunSummary {
        config_hash: hash,
        ser_blip_db,
        ser_mrf_db,
        blip_iterations: blip_res.trace.records.len(),
        final_residual,
        num_atoms: dict.num_atoms(),
        infeasible_filtered: dict.infeasible_filtered,
        errors_blip,
        errors_mrf,
    };
    fs::write(out_dir.join("summary.txt"), summary_text(cfg, &summary))?;
    Ok(summary)
}

fn summary_text(cfg: &ValidatedConfig, s: &RunSummary) -> String {
    let mut out = String::new();
    out.push_str("# single run summary\n");
    out.push_str(&format!("config_hash {:016x}\n", s.config_hash));
    out.push_str(&format!("grid {}\n", cfg.phantom.grid));
    out.push_str(&format!("frames {}\n", cfg.excitation.length));
    out.push_str(&format!("p {}\n", cfg.sampling.p));
    out.push_str(&format!("atoms {}\n", s.num_atoms));
    out.push_str(&format!("infeasible_filtered {}\n", s.infeasible_filtered));
    out.push_str(&format!("ser_blip_db {}\n", s.ser_blip_db));
    out.push_str(&format!("ser_mrf_db {}\n", s.ser_mrf_db));
    out.push_str(&format!("blip_iterations {}\n", s.blip_iterations));
    out.push_str(&format!("final_residual {}\n", s.final_residual));
    out.push_str(&error_lines("blip", &s.errors_blip));
    out.push_str(&error_lines("mrf", &s.errors_mrf));
    out
}

/// Render a study report as a tab-separated table with transition comments.
pub fn study_to_tsv(report: &StudyReport, config_hash: u64) -> String {
    let mut s = String::new();
    s.push_str(&format!("# config_hash {config_hash:016x}\n"));
    s.push_str(&format!("# ser_threshold_db {}\n", report.ser_threshold_db));
    for (p, transition) in &report.transitions {
        match transition {
            Some(v) => s.push_str(&format!("# transition p={p} l_over_p2={v}\n")),
            None => s.push_str(&format!("# transition p={p} none\n")),
        }
    }
    s.push_str("l\tp\tl_over_p2\tmean_ser_db\ttrials_ok\ttrials_failed\n");
    for c in &report.cells {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            c.l, c.p, c.l_over_p2, c.mean_ser_db, c.trials_ok, c.trials_failed
        ));
    }
    s
}

/// Execute the scaling study and write `study.tsv`.
pub fn run_study(cfg: &ValidatedConfig, out_dir: &Path) -> Result<StudyReport> {
    let spec = cfg.study_spec()?;
    let report = scaling_study(&spec)?;
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("study.tsv"),
        study_to_tsv(&report, cfg.config_hash),
    )?;
    Ok(report)
}

/// One row of a flatness sweep.
#[derive(Debug, Clone)]
pub struct FlatnessRow {
    pub l: usize,
    pub lambda: f64,
    pub lambda_inv_sq_over_l: f64,
    pub num_chords: usize,
}

/// Execute a flatness sweep over sequence lengths and write `flatness.tsv`.
pub fn run_flatness(cfg: &ValidatedConfig, out_dir: &Path) -> Result<Vec<FlatnessRow>> {
    let settings = cfg
        .flatness
        .clone()
        .ok_or_else(|| crate::Error::Config("flatness: section is required".into()))?;
    let mut rows = Vec::new();
    for &l in &settings.l_values {
        let exc = random_excitation(
            l,
            cfg.excitation.flip_std_deg,
            cfg.excitation.tr_ms,
            derived_seed(cfg.master_seed, &format!("flatness-{l}")),
        )?;
        let dict = BlochDictionary::build(&cfg.grid, &exc)?;
        let report = flatness(
            &dict,
            settings.num_chords,
            derived_seed(cfg.master_seed, &format!("flatness-chords-{l}")),
        )?;
        rows.push(FlatnessRow {
            l,
            lambda: report.lambda,
            lambda_inv_sq_over_l: report.lambda_inv_sq_over_l,
            num_chords: report.num_chords,
        });
    }
    fs::create_dir_all(out_dir)?;
    let mut s = format!("# config_hash {:016x}\n", cfg.config_hash);
    s.push_str("l\tlambda\tlambda_inv_sq_over_l\tnum_chords\n");
    for r in &rows {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.l, r.lambda, r.lambda_inv_sq_over_l, r.num_chords
        ));
    }
    fs::write(out_dir.join("flatness.tsv"), s)?;
    Ok(rows)
}

/// Build the configured dictionary and save it as a binary artifact.
pub fn run_dict_build(cfg: &ValidatedConfig, out_file: &Path) -> Result<BlochDictionary> {
    let exc = random_excitation(
        cfg.excitation.length,
        cfg.excitation.flip_std_deg,
        cfg.excitation.tr_ms,
        cfg.excitation.seed,
    )?;
    let dict = BlochDictionary::build(&cfg.grid, &exc)?;
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    io::save_dictionary(&dict, out_file)?;
    Ok(dict)
}

/// Write the configured phantom as a round-trippable label-map artifact.
pub fn run_phantom_gen(cfg: &ValidatedConfig, out_file: &Path) -> Result<()> {
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    io::save_phantom(&cfg.phantom, out_file)
}
