// Validation deliberately uses NaN-rejecting comparisons like `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Compressed quantitative MRI toolkit.
//!
//! Synthesizes magnetization response sequences from tissue parameter maps,
//! subsamples k-space with a randomized EPI scheme, and recovers proton
//! density / T1 / T2 / off-resonance maps by iterated projection onto the
//! discretized Bloch response cone, with a single-pass matched-filter
//! baseline and empirical probes for the sampling operator.

pub mod analysis;
pub mod bloch;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod phantom;
pub mod projection;
pub mod recon;
pub mod sampling;
pub mod types;

pub use error::{Error, Result};
