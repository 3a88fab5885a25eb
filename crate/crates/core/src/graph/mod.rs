//! Graph and dataset representations, splitting, label corruption, and
//! featurization of unattributed graphs.
//!
//! Graphs are dense: adjacency is an n×n symmetric matrix of edge weights in
//! [0,1] with a zero diagonal (raw graphs are exactly 0/1; mixed graphs are
//! weighted and in general fully connected). Labels are always length-C
//! distributions — one-hot for original graphs, soft for mixed graphs.

mod motif;
mod tudataset;

pub use motif::{gen_motif_dataset, BaseKind, MotifConfig, MotifKind};
pub use tudataset::{load_tudataset, save_tudataset};

use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::Matrix;

/// Errors from graph construction and dataset plumbing.
#[derive(Error, Debug)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("adjacency must be square, got {rows}x{cols}")]
    AdjacencyNotSquare { rows: usize, cols: usize },
    #[error("adjacency is not symmetric at ({i},{j})")]
    AsymmetricAdjacency { i: usize, j: usize },
    #[error("adjacency diagonal must be zero, found {value} at node {i}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("adjacency entry ({i},{j}) = {value} outside [0,1]")]
    AdjacencyOutOfRange { i: usize, j: usize, value: f64 },
    #[error("feature matrix has {rows} rows for {n} nodes")]
    FeatureRowsMismatch { rows: usize, n: usize },
    #[error("non-finite feature at node {row}")]
    NonFiniteFeature { row: usize },
    #[error("label must be a distribution: {reason}")]
    BadLabel { reason: String },
    #[error("dataset `{name}` is empty")]
    EmptyDataset { name: String },
    #[error("graph {index} has {got} label entries, dataset has {expected} classes")]
    InconsistentClassCount {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("graph {index} has feature width {got}, dataset width is {expected}")]
    InconsistentFeatureDim {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("split ratios must be positive and sum to 1, got ({0}, {1}, {2})", .ratios.0, .ratios.1, .ratios.2)]
    BadSplitRatios { ratios: (f64, f64, f64) },
    #[error("{part} split is empty after rounding")]
    EmptySplit { part: &'static str },
    #[error("corruption ratio {ratio} outside [0,1]")]
    BadCorruptionRatio { ratio: f64 },
    #[error("label corruption needs at least 2 classes, dataset has {classes}")]
    TooFewClasses { classes: usize },
    #[error("dataset already attributed with feature width {dim}")]
    AlreadyAttributed { dim: usize },
    #[error("motif config invalid: {reason}")]
    BadMotifConfig { reason: String },
    #[error("missing mandatory file {path}")]
    MissingFile { path: PathBuf },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("{file}:{line}: node index {index} out of range 1..={max}")]
    NodeIndexOutOfRange {
        file: String,
        line: usize,
        index: i64,
        max: usize,
    },
    #[error("{file}:{line}: graph id {id} out of range 1..={max}")]
    GraphIdOutOfRange {
        file: String,
        line: usize,
        id: i64,
        max: usize,
    },
    #[error("{file}:{line}: attribute row has {got} values, expected {expected}")]
    RaggedAttributes {
        file: String,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("{file}: expected {expected} lines, got {got}")]
    WrongLineCount {
        file: String,
        expected: usize,
        got: usize,
    },
    #[error("graph {index} has non-binary edge weights; flat-file format stores unweighted edges")]
    NonBinaryAdjacency { index: usize },
    #[error("graph {index} has a soft label; flat-file format stores one class per graph")]
    SoftLabel { index: usize },
    #[error("unknown {what} `{value}` (expected one of {expected})")]
    UnknownName {
        what: &'static str,
        value: String,
        expected: &'static str,
    },
}

/// A single undirected graph with dense weighted adjacency, node features,
/// and a label distribution. Construction validates every invariant; all
/// operations in this crate emit graphs that re-validate cleanly.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: Matrix,
    features: Matrix,
    label: Vec<f64>,
}

impl Graph {
    pub fn new(adjacency: Matrix, features: Matrix, label: Vec<f64>) -> Result<Self, GraphError> {
        let g = Self {
            adjacency,
            features,
            label,
        };
        g.validate()?;
        Ok(g)
    }

    /// Re-checks every structural invariant. Every graph built through
    /// [`Graph::new`] has passed this; tests apply it to the output of every
    /// graph-producing operation.
    pub fn validate(&self) -> Result<(), GraphError> {
        let (rows, cols) = self.adjacency.dim();
        if rows != cols {
            return Err(GraphError::AdjacencyNotSquare { rows, cols });
        }
        let n = rows;
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        for i in 0..n {
            let d = self.adjacency[[i, i]];
            if d != 0.0 {
                return Err(GraphError::NonzeroDiagonal { i, value: d });
            }
            for j in 0..n {
                let v = self.adjacency[[i, j]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(GraphError::AdjacencyOutOfRange { i, j, value: v });
                }
                if v != self.adjacency[[j, i]] {
                    return Err(GraphError::AsymmetricAdjacency { i, j });
                }
            }
        }
        if self.features.nrows() != n {
            return Err(GraphError::FeatureRowsMismatch {
                rows: self.features.nrows(),
                n,
            });
        }
        for (i, row) in self.features.rows().into_iter().enumerate() {
            if row.iter().any(|x| !x.is_finite()) {
                return Err(GraphError::NonFiniteFeature { row: i });
            }
        }
        if self.label.is_empty() {
            return Err(GraphError::BadLabel {
                reason: "label vector is empty".into(),
            });
        }
        let mut sum = 0.0;
        for (c, &y) in self.label.iter().enumerate() {
            if !y.is_finite() || y < 0.0 {
                return Err(GraphError::BadLabel {
                    reason: format!("entry {c} = {y} is negative or non-finite"),
                });
            }
            sum += y;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GraphError::BadLabel {
                reason: format!("entries sum to {sum}, expected 1 within 1e-9"),
            });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn label(&self) -> &[f64] {
        &self.label
    }

    pub fn num_classes(&self) -> usize {
        self.label.len()
    }

    /// Argmax class of the label distribution (lowest index wins ties).
    pub fn hard_label(&self) -> usize {
        let mut best = 0;
        for c in 1..self.label.len() {
            if self.label[c] > self.label[best] {
                best = c;
            }
        }
        best
    }

    /// Weighted degree of node `i` (row sum; equals the ordinary degree on
    /// 0/1 graphs).
    pub fn degree(&self, i: usize) -> f64 {
        self.adjacency.row(i).sum()
    }

    /// Relabels nodes so new node `i` is old node `perm[i]`. `perm` must be
    /// a permutation of `0..n`.
    pub fn permute(&self, perm: &[usize]) -> Graph {
        let n = self.n();
        assert_eq!(perm.len(), n, "permutation length must equal node count");
        let adjacency =
            Matrix::from_shape_fn((n, n), |(i, j)| self.adjacency[[perm[i], perm[j]]]);
        let features = Matrix::from_shape_fn((n, self.feature_dim()), |(i, k)| {
            self.features[[perm[i], k]]
        });
        Graph {
            adjacency,
            features,
            label: self.label.clone(),
        }
    }
}

/// An ordered collection of graphs sharing one class count and one feature
/// width. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphDataset {
    name: String,
    graphs: Vec<Graph>,
    num_classes: usize,
    feature_dim: usize,
}

impl GraphDataset {
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>) -> Result<Self, GraphError> {
        let name = name.into();
        if graphs.is_empty() {
            return Err(GraphError::EmptyDataset { name });
        }
        let num_classes = graphs[0].num_classes();
        let feature_dim = graphs[0].feature_dim();
        for (index, g) in graphs.iter().enumerate() {
            if g.num_classes() != num_classes {
                return Err(GraphError::InconsistentClassCount {
                    index,
                    expected: num_classes,
                    got: g.num_classes(),
                });
            }
            if g.feature_dim() != feature_dim {
                return Err(GraphError::InconsistentFeatureDim {
                    index,
                    expected: feature_dim,
                    got: g.feature_dim(),
                });
            }
        }
        Ok(Self {
            name,
            graphs,
            num_classes,
            feature_dim,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn graph(&self, i: usize) -> &Graph {
        &self.graphs[i]
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }
}

/// Splits a dataset into train/val/test by a seeded uniform permutation.
/// Sizes are `floor(ratio·n)` for train and val; test takes the remainder.
pub fn split_dataset(
    ds: &GraphDataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(GraphDataset, GraphDataset, GraphDataset), GraphError> {
    let (rt, rv, rs) = ratios;
    if !(rt > 0.0 && rv > 0.0 && rs > 0.0) || (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(GraphError::BadSplitRatios { ratios });
    }
    let n = ds.len();
    let n_train = (rt * n as f64).floor() as usize;
    let n_val = (rv * n as f64).floor() as usize;
    let n_test = n - n_train - n_val;
    if n_train == 0 {
        return Err(GraphError::EmptySplit { part: "train" });
    }
    if n_val == 0 {
        return Err(GraphError::EmptySplit { part: "val" });
    }
    if n_test == 0 {
        return Err(GraphError::EmptySplit { part: "test" });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let take = |range: std::ops::Range<usize>, part: &str| -> Result<GraphDataset, GraphError> {
        let graphs: Vec<Graph> = idx[range].iter().map(|&i| ds.graph(i).clone()).collect();
        GraphDataset::new(format!("{}-{part}", ds.name()), graphs)
    };
    Ok((
        take(0..n_train, "train")?,
        take(n_train..n_train + n_val, "val")?,
        take(n_train + n_val..n, "test")?,
    ))
}

/// Replaces the labels of exactly `round(ratio·n)` uniformly chosen graphs
/// with a uniform-random *different* class (one-hot). All other graphs are
/// untouched.
pub fn corrupt_labels(
    ds: &GraphDataset,
    ratio: f64,
    seed: u64,
) -> Result<GraphDataset, GraphError> {
    if !(0.0..=1.0).contains(&ratio) || !ratio.is_finite() {
        return Err(GraphError::BadCorruptionRatio { ratio });
    }
    if ratio > 0.0 && ds.num_classes() < 2 {
        return Err(GraphError::TooFewClasses {
            classes: ds.num_classes(),
        });
    }
    let n = ds.len();
    let k = (ratio * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut chosen: Vec<usize> = idx.into_iter().take(k).collect();
    chosen.sort_unstable();
    let c = ds.num_classes();
    let mut graphs: Vec<Graph> = ds.graphs().to_vec();
    for &i in &chosen {
        let orig = graphs[i].hard_label();
        let mut alt = rng.random_range(0..c - 1);
        if alt >= orig {
            alt += 1;
        }
        let mut label = vec![0.0; c];
        label[alt] = 1.0;
        graphs[i] = Graph::new(
            graphs[i].adjacency().clone(),
            graphs[i].features().clone(),
            label,
        )?;
    }
    GraphDataset::new(ds.name(), graphs)
}

/// Node featurization scheme for datasets without node attributes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureScheme {
    /// Every node receives the single feature `[1]`.
    Constant,
    /// One-hot of `min(degree, cap)` over `cap+1` slots.
    DegreeOnehot { cap: usize },
}

impl FromStr for FeatureScheme {
    type Err = GraphError;

    /// Parses `constant` or `degree-onehot` (the cap is configured
    /// separately and defaults to 32).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(FeatureScheme::Constant),
            "degree-onehot" => Ok(FeatureScheme::DegreeOnehot { cap: 32 }),
            other => Err(GraphError::UnknownName {
                what: "feature scheme",
                value: other.to_string(),
                expected: "constant, degree-onehot",
            }),
        }
    }
}

/// Attaches node features to an unattributed dataset.
pub fn featurize_unattributed(
    ds: &GraphDataset,
    scheme: FeatureScheme,
) -> Result<GraphDataset, GraphError> {
    if ds.feature_dim() != 0 {
        return Err(GraphError::AlreadyAttributed {
            dim: ds.feature_dim(),
        });
    }
    let mut graphs = Vec::with_capacity(ds.len());
    for g in ds.graphs() {
        let n = g.n();
        let features = match scheme {
            FeatureScheme::Constant => Matrix::from_elem((n, 1), 1.0),
            FeatureScheme::DegreeOnehot { cap } => {
                let mut f = Matrix::zeros((n, cap + 1));
                for i in 0..n {
                    let k = (g.degree(i).round() as usize).min(cap);
                    f[[i, k]] = 1.0;
                }
                f
            }
        };
        graphs.push(Graph::new(
            g.adjacency().clone(),
            features,
            g.label().to_vec(),
        )?);
    }
    GraphDataset::new(ds.name(), graphs)
}

/// Builds an n×n 0/1 adjacency matrix from an undirected edge list.
pub fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Matrix {
    let mut a = Matrix::zeros((n, n));
    for &(i, j) in edges {
        assert!(i != j, "self-loops are not representable");
        a[[i, j]] = 1.0;
        a[[j, i]] = 1.0;
    }
    a
}

/// One-hot label helper.
pub(crate) fn one_hot(class: usize, num_classes: usize) -> Vec<f64> {
    let mut y = vec![0.0; num_classes];
    y[class] = 1.0;
    y
}
