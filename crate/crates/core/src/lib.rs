//! Query hardness analysis for graph-based approximate nearest neighbor indexes.
//!
//! The crate estimates how much work a greedy graph search needs to answer a
//! k-nearest-neighbor query. The main pieces are:
//!
//! - [`dataset`]: `fvecs`/`ivecs` I/O, Euclidean distance and exact ground truth.
//! - [`graphs`]: KGraph, angle-pruned approximate MRNG and a single-layer
//!   HNSW-style index, plus the binary graph file format.
//! - [`search`]: instrumented greedy beam search, recall, NDC-to-recall sweeps
//!   and phase breakdown.
//! - [`reach`]: incremental search for the critical radius and its witness
//!   start/terminal pairs over a union-find set graph.
//! - [`steiner`]: shortest-path Steiner heuristics, decision cost and the three
//!   minimum-effort variants.
//! - [`hardness`]: Steiner-hardness and the LID / RC / QE / epsilon baselines.
//! - [`workload`]: GMM fitting and sampling and hardness-stratified selection.
//! - [`experiment`]: desk-scale correlation experiments.
//! - [`cli`]: the `gah` command-line front end.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod dataset;
mod error;
pub mod experiment;
pub mod graphs;
pub mod hardness;
pub mod reach;
pub mod search;
pub mod steiner;
pub mod workload;

pub use dataset::{distance, Neighbor, NeighborList, VectorSet};
pub use error::{Error, Result};
pub use graphs::DirectedGraph;

/// `ceil(frac * k)` with a small slack so that e.g. `0.9 * 10` is 9, not 10.
pub fn required_count(frac: f64, k: usize) -> usize {
    let x = frac * k as f64;
    let c = (x - 1e-9).ceil();
    if c < 0.0 {
        0
    } else {
        c as usize
    }
}
