//! Correlated attributed random networks.
//!
//! Sampling of correlated Gaussian mixture databases and correlated
//! contextual SBM graph pairs, node-correspondence recovery (minimum-distance,
//! k-core and two-step matching), community recovery on the merged pair,
//! threshold classifiers, brute-force reference solvers and a Monte Carlo
//! experiment harness.

pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod matching;
pub mod models;
pub mod oracle;
pub mod recovery;
pub mod rng;
pub mod theory;
pub mod types;

pub use error::{Error, Result};
pub use graph::{core_numbers, graph_intersection, graph_union, k_core, SimpleGraph};
pub use models::{
    sample, sample_ccsbm, sample_cgmm, CcsbmParams, CgmmParams, CorrelatedInstance, MeanSpec,
    ModelParams,
};
pub use rng::{Purpose, Seed};
pub use types::{
    apply_permutation, label_overlap_up_to_sign, overlap, AttributeDatabase, LabelVector,
    PartialMatching, Permutation,
};
