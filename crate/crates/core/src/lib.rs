//! Graph auto-encoder clustering with reliable-node sampling and
//! clustering-oriented rewriting of the reconstruction target.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense/sparse kernels, Adam, finite-difference and cosine oracles
//! - [`graph`]: attributed graphs, dataset files, normalization, perturbations
//! - [`cluster`]: k-means, soft assignments, Hungarian matching, metrics
//! - [`model`]: GCN encoders, losses with closed-form gradients, training loops
//! - [`operators`]: the reliable-node sampler and the graph-rewriting operator
//! - [`diagnostics`]: gradient-alignment metrics, identity checks, traces
//! - [`harness`]: experiment configs, seeded runs, ablation and robustness grids

pub mod cluster;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod par;

pub use error::{Error, Result};
