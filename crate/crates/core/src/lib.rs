//! Graph classification data augmentation by soft alignments.
//!
//! The library mixes pairs of graphs through a learned soft assignment
//! matrix: a graph matching network embeds both graphs jointly, a
//! column-stochastic assignment transplants the second graph onto the first
//! graph's node set, and the pair is linearly interpolated (adjacency,
//! features, and labels). Augmented batches feed ordinary GNN classifiers
//! (GCN / GIN). A graph-edit-distance toolkit verifies that mixed graphs
//! sit between their parents in edit space.
//!
//! Module map:
//! - [`graph`] — graph/dataset types, TUDataset flat-file IO, synthetic
//!   motif dataset generation, splitting, label corruption, featurization.
//! - [`numerics`] — matrix kernels, normalizers (column softmax, Sinkhorn),
//!   similarity metrics, Beta mixing-ratio sampling, and a reverse-mode
//!   gradient recorder with a finite-difference validator.
//! - [`gnn`] — GCN/GIN backbones, readout, classification head, soft-target
//!   cross-entropy.
//! - [`matcher`] — the graph matching network (cross-graph attention),
//!   assignment matrices, triplet loss, and its training loop.
//! - [`mixup`] — graph transformation under an assignment, pairwise mixing,
//!   the random-alignment baseline, and batch augmentation.
//! - [`ged`] — aligned (identity-mapping) GED, an exact GED oracle for tiny
//!   graphs, normalized GED, and the mixup-ratio bound verifier.
//! - [`harness`] — classifier training/evaluation, experiment orchestration,
//!   config parsing, metrics emission.

pub mod checkpoint;
pub mod ged;
pub mod gnn;
pub mod graph;
pub mod harness;
pub mod matcher;
pub mod mixup;
pub mod numerics;
pub mod optim;

pub use ndarray;

/// Dense row-major double-precision matrix used throughout the crate.
pub type Matrix = ndarray::Array2<f64>;

pub use graph::{Graph, GraphDataset};
pub use matcher::AssignmentMatrix;
pub use numerics::{Metric, MixRatioSpec, RangeMode};
