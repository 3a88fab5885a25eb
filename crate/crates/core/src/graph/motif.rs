//! Synthetic motif-classification dataset generator.
//!
//! Each graph is one random base (tree, ladder, or wheel) joined to one
//! motif (cycle, house, or crane) by exactly one attachment edge. The label
//! is the motif class, node features are the constant scalar 1, so class
//! information lives only in the topology.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Matrix;

use super::{adjacency_from_edges, one_hot, Graph, GraphDataset, GraphError};

/// Motif shapes. One class per motif.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotifKind {
    /// 5-cycle.
    Cycle,
    /// 4-cycle `0-1-2-3` plus a roof node 4 adjacent to 0 and 1.
    House,
    /// 4-cycle `0-1-2-3` plus pendant node 4 adjacent to 0 and pendant
    /// node 5 adjacent to 2.
    Crane,
}

impl MotifKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MotifKind::Cycle => "cycle",
            MotifKind::House => "house",
            MotifKind::Crane => "crane",
        }
    }

    /// Number of motif nodes.
    pub fn order(self) -> usize {
        match self {
            MotifKind::Cycle | MotifKind::House => 5,
            MotifKind::Crane => 6,
        }
    }

    /// Undirected edge list over `0..order()`.
    pub fn edges(self) -> Vec<(usize, usize)> {
        match self {
            MotifKind::Cycle => vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)],
            MotifKind::House => vec![(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)],
            MotifKind::Crane => vec![(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (5, 2)],
        }
    }
}

impl std::fmt::Display for MotifKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MotifKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cycle" => Ok(MotifKind::Cycle),
            "house" => Ok(MotifKind::House),
            "crane" => Ok(MotifKind::Crane),
            other => Err(GraphError::UnknownName {
                what: "motif",
                value: other.to_string(),
                expected: "cycle, house, crane",
            }),
        }
    }
}

/// Base shapes the motif is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseKind {
    /// Random tree grown by uniform random attachment.
    Tree,
    /// 2×k grid, k = size/2 (odd sizes round down to an even node count).
    Ladder,
    /// Hub node connected to every node of a cycle rim.
    Wheel,
}

impl BaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaseKind::Tree => "tree",
            BaseKind::Ladder => "ladder",
            BaseKind::Wheel => "wheel",
        }
    }
}

impl std::fmt::Display for BaseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaseKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tree" => Ok(BaseKind::Tree),
            "ladder" => Ok(BaseKind::Ladder),
            "wheel" => Ok(BaseKind::Wheel),
            other => Err(GraphError::UnknownName {
                what: "base",
                value: other.to_string(),
                expected: "tree, ladder, wheel",
            }),
        }
    }
}

/// Configuration for [`gen_motif_dataset`]. The motif list doubles as the
/// class list: class `c` is `motifs[c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MotifConfig {
    pub motifs: Vec<MotifKind>,
    pub bases: Vec<BaseKind>,
    /// Inclusive base-size range in nodes; minimum 4.
    pub base_size_min: usize,
    pub base_size_max: usize,
    pub count_per_class: usize,
    pub seed: u64,
}

impl Default for MotifConfig {
    fn default() -> Self {
        Self {
            motifs: vec![MotifKind::Cycle, MotifKind::House, MotifKind::Crane],
            bases: vec![BaseKind::Tree, BaseKind::Ladder, BaseKind::Wheel],
            base_size_min: 8,
            base_size_max: 16,
            count_per_class: 100,
            seed: 0,
        }
    }
}

impl MotifConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |reason: &str| {
            Err(GraphError::BadMotifConfig {
                reason: reason.to_string(),
            })
        };
        if self.motifs.is_empty() {
            return bad("motif set is empty");
        }
        for (i, m) in self.motifs.iter().enumerate() {
            if self.motifs[..i].contains(m) {
                return bad("motif set contains duplicates");
            }
        }
        if self.bases.is_empty() {
            return bad("base set is empty");
        }
        if self.base_size_min < 4 {
            return bad("base size minimum must be at least 4");
        }
        if self.base_size_min > self.base_size_max {
            return bad("base size range is inverted");
        }
        if self.count_per_class < 1 {
            return bad("count per class must be at least 1");
        }
        Ok(())
    }
}

/// Builds a base graph of the requested kind, returning its node count and
/// undirected edge list. `size` is the nominal node count (ladders use the
/// largest even count ≤ size).
fn base_graph(kind: BaseKind, size: usize, rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize)>) {
    match kind {
        BaseKind::Tree => {
            let edges = (1..size).map(|i| (i, rng.random_range(0..i))).collect();
            (size, edges)
        }
        BaseKind::Ladder => {
            let k = size / 2;
            let mut edges = Vec::new();
            for i in 0..k - 1 {
                edges.push((i, i + 1));
                edges.push((k + i, k + i + 1));
            }
            for i in 0..k {
                edges.push((i, k + i));
            }
            (2 * k, edges)
        }
        BaseKind::Wheel => {
            let rim = size - 1;
            let mut edges = Vec::new();
            for i in 1..rim {
                edges.push((i, i + 1));
            }
            edges.push((rim, 1));
            for i in 1..=rim {
                edges.push((0, i));
            }
            (size, edges)
        }
    }
}

/// Generates the synthetic dataset: `count_per_class` graphs per motif
/// class, in class-major order, each connected by construction.
pub fn gen_motif_dataset(cfg: &MotifConfig) -> Result<GraphDataset, GraphError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let num_classes = cfg.motifs.len();
    let mut graphs = Vec::with_capacity(num_classes * cfg.count_per_class);
    for (class, &motif) in cfg.motifs.iter().enumerate() {
        for _ in 0..cfg.count_per_class {
            let base_kind = cfg.bases[rng.random_range(0..cfg.bases.len())];
            let size = rng.random_range(cfg.base_size_min..=cfg.base_size_max);
            let (base_n, mut edges) = base_graph(base_kind, size, &mut rng);
            for (u, v) in motif.edges() {
                edges.push((base_n + u, base_n + v));
            }
            let attach_base = rng.random_range(0..base_n);
            let attach_motif = base_n + rng.random_range(0..motif.order());
            edges.push((attach_base, attach_motif));
            let n = base_n + motif.order();
            graphs.push(Graph::new(
                adjacency_from_edges(n, &edges),
                Matrix::from_elem((n, 1), 1.0),
                one_hot(class, num_classes),
            )?);
        }
    }
    GraphDataset::new("MOTIF", graphs)
}
