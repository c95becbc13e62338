//! Experiment configuration: a single TOML document per experiment,
//! validated in full before any compute runs.
//!
//! Unknown keys are rejected. Every output file is stamped with a hash of
//! the effective configuration (after any command-line seed override), so
//! outputs are a pure function of the config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::StudySpec;
use crate::bloch::{ParameterGrid, TissueParams};
use crate::error::{Error, Result};
use crate::io::fnv1a;
use crate::phantom::{default_six_tissues, PhantomDefinition, PhantomKind, TissueSpec};
use crate::recon::{ReconConfig, StepsizeMode};
use crate::sampling::SubsampledAxis;
use crate::types::GridDims;

/// Raw configuration document, mirroring the TOML schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// One of `single_run`, `scaling_study`, `flatness`.
    pub kind: String,
    pub master_seed: u64,
    pub phantom: Option<PhantomSection>,
    pub excitation: Option<ExcitationSection>,
    pub dictionary: Option<DictionarySection>,
    pub sampling: Option<SamplingSection>,
    pub recon: Option<ReconSection>,
    pub study: Option<StudySection>,
    pub flatness: Option<FlatnessSection>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSection {
    /// One of `concentric`, `blocks`, `file`.
    pub kind: String,
    pub n: Option<usize>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    /// Label-map file, required for `kind = "file"`; relative paths resolve
    /// against the config file location.
    pub file: Option<String>,
    /// Tissue table; defaults to the built-in six-component table.
    pub tissues: Option<Vec<TissueEntry>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TissueEntry {
    pub label: u32,
    pub t1: f64,
    pub t2: f64,
    #[serde(default)]
    pub df: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSection {
    pub length: usize,
    pub flip_std_deg: Option<f64>,
    pub tr_ms: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionarySection {
    /// Inclusive `[start, step, stop]` segments per axis.
    pub t1_segments: Option<Vec<[f64; 3]>>,
    pub t2_segments: Option<Vec<[f64; 3]>>,
    pub df_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub p: usize,
    /// Decimated axis for 2-D grids: `rows` or `cols`. Default `rows`.
    pub axis: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconSection {
    pub max_iters: Option<usize>,
    pub halt_tol: Option<f64>,
    /// `adaptive` or `fixed`.
    pub stepsize_mode: Option<String>,
    /// Fixed stepsize; defaults to `N/M` when omitted in fixed mode.
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub l_values: Vec<usize>,
    pub p_values: Vec<usize>,
    pub trials: Option<usize>,
    pub ser_threshold_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatnessSection {
    pub l_values: Vec<usize>,
    pub num_chords: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

/// Experiment kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SingleRun,
    ScalingStudy,
    Flatness,
}

/// Excitation parameters after validation.
#[derive(Debug, Clone, Copy)]
pub struct ExcitationSpec {
    pub length: usize,
    pub flip_std_deg: f64,
    pub tr_ms: f64,
    pub seed: u64,
}

/// Sampling parameters after validation.
#[derive(Debug, Clone, Copy)]
pub struct SamplingSpec {
    pub p: usize,
    pub axis: SubsampledAxis,
    pub seed: u64,
}

/// Reconstruction settings before the sampling plan is known: a fixed
/// stepsize may be left implicit (`None`), meaning `N/M` for the plan.
#[derive(Debug, Clone, Copy)]
pub struct ReconSpec {
    pub max_iters: usize,
    pub halt_tol: f64,
    pub mode: ReconMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReconMode {
    Adaptive,
    Fixed(Option<f64>),
}

/// Fully validated configuration, ready to execute.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    pub config_hash: u64,
    pub phantom: PhantomDefinition,
    pub excitation: ExcitationSpec,
    pub grid: ParameterGrid,
    pub sampling: SamplingSpec,
    pub recon: ReconSpec,
    pub study: Option<StudySettings>,
    pub flatness: Option<FlatnessSettings>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct StudySettings {
    pub l_values: Vec<usize>,
    pub p_values: Vec<usize>,
    pub trials: usize,
    pub ser_threshold_db: f64,
}

#[derive(Debug, Clone)]
pub struct FlatnessSettings {
    pub l_values: Vec<usize>,
    pub num_chords: usize,
}

/// Deterministic per-purpose seed derived from the master seed.
pub fn derived_seed(master: u64, tag: &str) -> u64 {
    let mut bytes = master.to_le_bytes().to_vec();
    bytes.extend_from_slice(tag.as_bytes());
    fnv1a(&bytes)
}

fn usage(field: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {reason}"))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    /// Canonical serialization used for the config hash.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validate everything needed by the requested experiment kind and
    /// resolve defaults. `base_dir` anchors relative file references.
    pub fn validate(&self, base_dir: &Path) -> Result<ValidatedConfig> {
        let kind = match self.kind.as_str() {
            "single_run" => ExperimentKind::SingleRun,
            "scaling_study" => ExperimentKind::ScalingStudy,
            "flatness" => ExperimentKind::Flatness,
            other => {
                return Err(usage(
                    "kind",
                    format!("expected single_run | scaling_study | flatness, got '{other}'"),
                ))
            }
        };
        let config_hash = fnv1a(self.canonical().as_bytes());

        let phantom = self.validated_phantom(base_dir)?;
        let excitation = self.validated_excitation()?;
        let grid = self.validated_grid()?;
        let sampling = self.validated_sampling(&phantom)?;
        let recon = self.validated_recon()?;

        let study = match (&self.study, kind) {
            (Some(s), _) => {
                if s.l_values.is_empty() || s.p_values.is_empty() {
                    return Err(usage("study", "l_values and p_values must be nonempty"));
                }
                Some(StudySettings {
                    l_values: s.l_values.clone(),
                    p_values: s.p_values.clone(),
                    trials: s.trials.unwrap_or(1).max(1),
                    ser_threshold_db: s.ser_threshold_db.unwrap_or(20.0),
                })
            }
            (None, ExperimentKind::ScalingStudy) => {
                return Err(usage("study", "section required for kind = scaling_study"))
            }
            (None, _) => None,
        };
        let flatness = match (&self.flatness, kind) {
            (Some(f), _) => {
                if f.l_values.is_empty() {
                    return Err(usage("flatness.l_values", "must be nonempty"));
                }
                Some(FlatnessSettings {
                    l_values: f.l_values.clone(),
                    num_chords: f.num_chords.unwrap_or(2000).max(1),
                })
            }
            (None, ExperimentKind::Flatness) => {
                return Err(usage("flatness", "section required for kind = flatness"))
            }
            (None, _) => None,
        };

        let out_dir = self
            .output
            .as_ref()
            .and_then(|o| o.dir.clone())
            .unwrap_or_else(|| "out".to_string());

        Ok(ValidatedConfig {
            kind,
            master_seed: self.master_seed,
            config_hash,
            phantom,
            excitation,
            grid,
            sampling,
            recon,
            study,
            flatness,
            out_dir: base_dir.join(out_dir),
        })
    }

    fn validated_phantom(&self, base_dir: &Path) -> Result<PhantomDefinition> {
        let section = self
            .phantom
            .as_ref()
            .ok_or_else(|| usage("phantom", "section is required"))?;
        let tissues: Vec<TissueSpec> = match &section.tissues {
            Some(entries) => entries
                .iter()
                .map(|e| TissueSpec {
                    label: e.label,
                    params: TissueParams {
                        t1: e.t1,
                        t2: e.t2,
                        df: e.df,
                    },
                    rho: e.rho,
                })
                .collect(),
            None => default_six_tissues(),
        };
        let grid = match (section.n, section.rows, section.cols) {
            (Some(n), None, None) => GridDims::OneD(n),
            (None, Some(rows), Some(cols)) => GridDims::TwoD { rows, cols },
            (None, None, None) if section.kind == "file" => GridDims::OneD(1), // replaced below
            _ => {
                return Err(usage(
                    "phantom",
                    "specify either n (1-D) or rows and cols (2-D)",
                ))
            }
        };
        match section.kind.as_str() {
            "concentric" => {
                PhantomDefinition::synth(PhantomKind::Concentric, grid, tissues, self.master_seed)
            }
            "blocks" => {
                PhantomDefinition::synth(PhantomKind::Blocks, grid, tissues, self.master_seed)
            }
            "file" => {
                let file = section
                    .file
                    .as_ref()
                    .ok_or_else(|| usage("phantom.file", "required for kind = file"))?;
                crate::io::load_phantom(&base_dir.join(file))
            }
            other => Err(usage(
                "phantom.kind",
                format!("expected concentric | blocks | file, got '{other}'"),
            )),
        }
    }

    fn validated_excitation(&self) -> Result<ExcitationSpec> {
        let section = self
            .excitation
            .as_ref()
            .ok_or_else(|| usage("excitation", "section is required"))?;
        if section.length == 0 {
            return Err(usage("excitation.length", "must be at least 1"));
        }
        let flip_std_deg = section.flip_std_deg.unwrap_or(10.0);
        let tr_ms = section.tr_ms.unwrap_or(10.0);
        if !(flip_std_deg > 0.0) {
            return Err(usage("excitation.flip_std_deg", "must be positive"));
        }
        if !(tr_ms > 0.0) {
            return Err(usage("excitation.tr_ms", "must be positive"));
        }
        Ok(ExcitationSpec {
            length: section.length,
            flip_std_deg,
            tr_ms,
            seed: section
                .seed
                .unwrap_or_else(|| derived_seed(self.master_seed, "excitation")),
        })
    }

    fn validated_grid(&self) -> Result<ParameterGrid> {
        let default = ParameterGrid::default_grid();
        let Some(section) = self.dictionary.as_ref() else {
            return Ok(default);
        };
        let t1 = match &section.t1_segments {
            Some(segs) => ParameterGrid::axis_from_segments(segs)
                .map_err(|e| usage("dictionary.t1_segments", e))?,
            None => default.t1_values.clone(),
        };
        let t2 = match &section.t2_segments {
            Some(segs) => ParameterGrid::axis_from_segments(segs)
                .map_err(|e| usage("dictionary.t2_segments", e))?,
            None => default.t2_values.clone(),
        };
        let df = section
            .df_values
            .clone()
            .unwrap_or_else(|| default.df_values.clone());
        ParameterGrid::new(t1, t2, df)
    }

    fn validated_sampling(&self, phantom: &PhantomDefinition) -> Result<SamplingSpec> {
        let section = self
            .sampling
            .as_ref()
            .ok_or_else(|| usage("sampling", "section is required"))?;
        let axis = match section.axis.as_deref() {
            None | Some("rows") => SubsampledAxis::Rows,
            Some("cols") => SubsampledAxis::Cols,
            Some(other) => {
                return Err(usage(
                    "sampling.axis",
                    format!("expected rows | cols, got '{other}'"),
                ))
            }
        };
        if section.p == 0 {
            return Err(usage("sampling.p", "must be at least 1"));
        }
        let axis_len = match phantom.grid {
            GridDims::OneD(n) => n,
            GridDims::TwoD { rows, cols } => match axis {
                SubsampledAxis::Rows => rows,
                SubsampledAxis::Cols => cols,
            },
        };
        if axis_len % section.p != 0 {
            return Err(usage(
                "sampling.p",
                format!(
                    "{} does not divide the decimated axis length {axis_len}",
                    section.p
                ),
            ));
        }
        Ok(SamplingSpec {
            p: section.p,
            axis,
            seed: section
                .seed
                .unwrap_or_else(|| derived_seed(self.master_seed, "sampling")),
        })
    }

    fn validated_recon(&self) -> Result<ReconSpec> {
        let section = self.recon.as_ref();
        let max_iters = section.and_then(|r| r.max_iters).unwrap_or(300);
        let halt_tol = section.and_then(|r| r.halt_tol).unwrap_or(1e-6);
        if max_iters == 0 {
            return Err(usage("recon.max_iters", "must be at least 1"));
        }
        if !(halt_tol >= 0.0) {
            return Err(usage("recon.halt_tol", "must be nonnegative"));
        }
        let mu = section.and_then(|r| r.mu);
        if let Some(mu) = mu {
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(usage("recon.mu", "must be positive and finite"));
            }
        }
        let mode = match section.and_then(|r| r.stepsize_mode.as_deref()) {
            None | Some("adaptive") => ReconMode::Adaptive,
            Some("fixed") => ReconMode::Fixed(mu),
            Some(other) => {
                return Err(usage(
                    "recon.stepsize_mode",
                    format!("expected adaptive | fixed, got '{other}'"),
                ))
            }
        };
        Ok(ReconSpec {
            max_iters,
            halt_tol,
            mode,
        })
    }
}

impl ValidatedConfig {
    /// Concrete reconstruction controls for a plan: an implicit fixed
    /// stepsize resolves to the plan's `N/M`.
    pub fn recon_for_plan(&self, n_over_m: f64) -> ReconConfig {
        ReconConfig {
            max_iters: self.recon.max_iters,
            halt_tol: self.recon.halt_tol,
            stepsize: match self.recon.mode {
                ReconMode::Adaptive => StepsizeMode::Adaptive,
                ReconMode::Fixed(mu) => StepsizeMode::Fixed(mu.unwrap_or(n_over_m)),
            },
        }
    }

    /// Assemble the scaling-study inputs from this config.
    pub fn study_spec(&self) -> Result<StudySpec> {
        let settings = self
            .study
            .as_ref()
            .ok_or_else(|| usage("study", "section is required"))?;
        let stepsize = match self.recon.mode {
            ReconMode::Adaptive => StepsizeMode::Adaptive,
            ReconMode::Fixed(Some(mu)) => StepsizeMode::Fixed(mu),
            ReconMode::Fixed(None) => {
                // N/M varies across the study's undersampling factors.
                return Err(usage(
                    "recon.mu",
                    "an explicit value is required for fixed-stepsize studies",
                ));
            }
        };
        Ok(StudySpec {
            l_values: settings.l_values.clone(),
            p_values: settings.p_values.clone(),
            trials: settings.trials,
            ser_threshold_db: settings.ser_threshold_db,
            phantom: self.phantom.clone(),
            grid: self.grid.clone(),
            flip_std_deg: self.excitation.flip_std_deg,
            tr_ms: self.excitation.tr_ms,
            axis: self.sampling.axis,
            recon: ReconConfig {
                max_iters: self.recon.max_iters,
                halt_tol: self.recon.halt_tol,
                stepsize,
            },
            master_seed: self.master_seed,
        })
    }
}

/// Load a config file, optionally overriding the master seed, and validate.
/// Returns the validated config; nothing is written on failure.
pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ValidatedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut raw = RawConfig::parse(&text)?;
    if let Some(seed) = seed_override {
        raw.master_seed = seed;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    raw.validate(base)
}
