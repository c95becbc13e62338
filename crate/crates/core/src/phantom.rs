//! Synthetic multi-tissue quantitative phantoms: procedurally generated
//! label geometries plus an ingestion path for external label maps, and
//! synthesis of the ground-truth magnetization sequence they induce.

use std::collections::BTreeMap;

use crate::bloch::{scale_response, simulate_response, ExcitationSequence, TissueParams};
use crate::error::{Error, Result};
use crate::projection::ParameterMaps;
use crate::types::{GridDims, ImageSequence};

/// One material component: a label, its tissue parameters, and its proton
/// density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TissueSpec {
    pub label: u32,
    pub params: TissueParams,
    pub rho: f64,
}

impl TissueSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::NegativeDensity { rho: self.rho });
        }
        Ok(())
    }
}

/// Procedural label geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    /// Nested elliptical bands around the grid center, outermost band
    /// reaching the corners.
    Concentric,
    /// Equal stripes along the last axis.
    Blocks,
}

/// A labeled phantom: grid geometry, per-voxel tissue labels, and the
/// tissue table.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomDefinition {
    pub grid: GridDims,
    pub label_map: Vec<u32>,
    pub tissues: Vec<TissueSpec>,
}

impl PhantomDefinition {
    /// Generate a deterministic label geometry. The seed is accepted for
    /// interface uniformity; the built-in kinds are purely geometric.
    pub fn synth(
        kind: PhantomKind,
        grid: GridDims,
        tissues: Vec<TissueSpec>,
        _seed: u64,
    ) -> Result<Self> {
        grid.validate()?;
        if tissues.is_empty() {
            return Err(Error::Config("phantom needs at least one tissue".into()));
        }
        for t in &tissues {
            t.validate()?;
        }
        let k = tissues.len();
        let n = grid.num_voxels();
        let band = |frac: f64| -> usize { ((frac * k as f64) as usize).min(k - 1) };
        let label_map: Vec<u32> = match (kind, grid) {
            (PhantomKind::Concentric, GridDims::OneD(len)) => (0..len)
                .map(|i| {
                    let c = (len as f64 - 1.0) / 2.0;
                    let r = (i as f64 - c).abs() / (c + 0.5);
                    tissues[band(r)].label
                })
                .collect(),
            (PhantomKind::Concentric, GridDims::TwoD { rows, cols }) => {
                let cy = (rows as f64 - 1.0) / 2.0;
                let cx = (cols as f64 - 1.0) / 2.0;
                let corner = {
                    let dy = cy / (rows as f64 / 2.0);
                    let dx = cx / (cols as f64 / 2.0);
                    (dy * dy + dx * dx).sqrt() + 1e-9
                };
                (0..n)
                    .map(|i| {
                        let r = (i / cols) as f64;
                        let c = (i % cols) as f64;
                        let dy = (r - cy) / (rows as f64 / 2.0);
                        let dx = (c - cx) / (cols as f64 / 2.0);
                        let rad = (dy * dy + dx * dx).sqrt() / corner;
                        tissues[band(rad)].label
                    })
                    .collect()
            }
            (PhantomKind::Blocks, GridDims::OneD(len)) => {
                (0..len).map(|i| tissues[i * k / len].label).collect()
            }
            (PhantomKind::Blocks, GridDims::TwoD { cols, .. }) => (0..n)
                .map(|i| tissues[(i % cols) * k / cols].label)
                .collect(),
        };
        let phantom = PhantomDefinition {
            grid,
            label_map,
            tissues,
        };
        phantom.validate()?;
        for t in &phantom.tissues {
            if !phantom.label_map.contains(&t.label) {
                return Err(Error::Config(format!(
                    "grid {grid} is too small to place tissue label {}",
                    t.label
                )));
            }
        }
        Ok(phantom)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.label_map.len() != self.grid.num_voxels() {
            return Err(Error::DimensionMismatch {
                context: "phantom label map",
                expected: self.grid.num_voxels(),
                actual: self.label_map.len(),
            });
        }
        if self.tissues.is_empty() {
            return Err(Error::Config("phantom needs at least one tissue".into()));
        }
        let mut labels = std::collections::BTreeSet::new();
        for t in &self.tissues {
            t.validate()?;
            if !labels.insert(t.label) {
                return Err(Error::Config(format!("duplicate tissue label {}", t.label)));
            }
        }
        for &lbl in &self.label_map {
            if !labels.contains(&lbl) {
                return Err(Error::UnknownLabel { label: lbl });
            }
        }
        Ok(())
    }

    pub fn tissue(&self, label: u32) -> Option<&TissueSpec> {
        self.tissues.iter().find(|t| t.label == label)
    }
}

/// Synthesize the ground-truth magnetization sequence and the generating
/// parameter maps: row `i` is the tissue response at voxel `i` scaled by its
/// proton density.
pub fn ground_truth_sequence(
    phantom: &PhantomDefinition,
    excitation: &ExcitationSequence,
) -> Result<(ImageSequence, ParameterMaps)> {
    phantom.validate()?;
    // One simulation per distinct label; voxels sharing a label share the row.
    let mut responses: BTreeMap<u32, Vec<num_complex::Complex64>> = BTreeMap::new();
    for tissue in &phantom.tissues {
        let first_voxel = phantom
            .label_map
            .iter()
            .position(|&l| l == tissue.label)
            .unwrap_or(0);
        let unit = simulate_response(&tissue.params, excitation)
            .map_err(|e| e.at_voxel(first_voxel))?;
        let scaled = scale_response(tissue.rho, &unit).map_err(|e| e.at_voxel(first_voxel))?;
        responses.insert(tissue.label, scaled);
    }
    let mut seq = ImageSequence::zeros(phantom.grid, excitation.len());
    let mut maps = ParameterMaps::zeros(phantom.grid);
    for (i, &label) in phantom.label_map.iter().enumerate() {
        let tissue = phantom.tissue(label).expect("validated label");
        seq.row_mut(i).copy_from_slice(&responses[&label]);
        maps.rho[i] = tissue.rho;
        maps.t1[i] = tissue.params.t1;
        maps.t2[i] = tissue.params.t2;
        maps.df[i] = tissue.params.df;
    }
    Ok((seq, maps))
}

/// Default six-component tissue table.
///
/// Representative relaxation values for brain-like components, deliberately
/// placed off the default dictionary grid, with proton densities chosen to
/// give little discrimination on their own. These are documented assumptions,
/// not measured values.
pub fn default_six_tissues() -> Vec<TissueSpec> {
    let t = |label, t1, t2, rho| TissueSpec {
        label,
        params: TissueParams { t1, t2, df: 0.0 },
        rho,
    };
    vec![
        t(0, 4340.0, 1840.0, 1.00), // CSF-like fluid
        t(1, 864.0, 99.0, 0.86),    // gray matter
        t(2, 584.0, 76.0, 0.77),    // white matter
        t(3, 1436.0, 244.0, 0.95),  // blood
        t(4, 904.0, 46.0, 0.80),    // muscle / skin
        t(5, 256.0, 61.0, 0.90),    // fat / marrow
    ]
}
