//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by simulation, sampling, reconstruction and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("simulation produced a non-finite value at time index {time_index}")]
    SimulationFailure { time_index: usize },

    #[error("proton density must be nonnegative, got {rho}")]
    NegativeDensity { rho: f64 },

    #[error("invalid tissue parameters: {reason}")]
    InvalidTissue { reason: String },

    #[error("invalid excitation sequence: {reason}")]
    InvalidExcitation { reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("voxel {voxel}: {source}")]
    Voxel {
        voxel: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("reconstruction diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("stepsize underflow at iteration {iteration}: mu = {mu:.3e} below minimum {mu_min:.3e}")]
    StepsizeUnderflow {
        iteration: usize,
        mu: f64,
        mu_min: f64,
    },

    #[error("all sampled chords were numerically zero")]
    DegenerateSampling,

    #[error("signal-to-error ratio is undefined for a zero reference sequence")]
    ZeroReference,

    #[error("no voxels with positive density in the error mask")]
    EmptyMask,

    #[error("unknown tissue label {label} in label map")]
    UnknownLabel { label: u32 },

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },
}

impl Error {
    /// Attach the voxel index at which a per-voxel operation failed.
    pub fn at_voxel(self, voxel: usize) -> Self {
        Error::Voxel {
            voxel,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
