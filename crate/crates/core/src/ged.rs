//! Graph edit distances for weighted, node-attributed graphs, and the
//! edit-space verification of mixed graphs.
//!
//! Two distances are provided. The *aligned* distance compares two graphs
//! on the same node set under the identity correspondence:
//!
//! ```text
//! aligned(Ga, Gb) = Σ_{ij} |Aa_ij − Ab_ij| + Σ_{ic} (Xa_ic − Xb_ic)²
//! ```
//!
//! (every undirected edge contributes at both ordered positions). The
//! *exact* distance minimizes over partial injective node mappings: a
//! mapped node costs the squared feature distance, a deleted or uncovered
//! node costs its squared feature norm, an ordered edge slot costs the
//! weight difference when both endpoints are mapped and the full weight
//! otherwise. Exhaustive search keeps it honest but caps graph size.
//!
//! [`normalized_ged`] locates a mixed graph between its parents in edit
//! space, and [`theorem1_bound`] bounds how far that position may drift
//! from the mixing ratio.

use thiserror::Error;

use crate::graph::Graph;

/// Largest graph the exhaustive edit-distance search accepts by default.
pub const EXACT_GED_NODE_LIMIT: usize = 8;

#[derive(Error, Debug)]
pub enum GedError {
    #[error("node counts differ: {na} vs {nb}")]
    NodeCountMismatch { na: usize, nb: usize },
    #[error("feature widths differ: {da} vs {db}")]
    FeatureWidthMismatch { da: usize, db: usize },
    #[error("graph has {n} nodes, exhaustive search is capped at {limit}")]
    SizeAboveLimit { n: usize, limit: usize },
    #[error("aligned-chain normalization requires the transplanted graph")]
    MissingAligned,
    #[error("both edit distances are zero; the position between the parents is undefined")]
    DegenerateNormalization,
    #[error("mix ratio {value} outside [0,1]")]
    BadRatio { value: f64 },
    #[error("unknown {what} `{value}` (expected one of {expected})")]
    UnknownName {
        what: &'static str,
        value: String,
        expected: &'static str,
    },
}

/// How the two legs of a parent-relative distance are measured.
///
/// `AlignedChain` keeps the mixed graph's own node set: the G1 leg is the
/// aligned distance, and the G2 leg goes through the transplanted graph
/// (`aligned(G′, G′2) + exact(G′2, G2)`). `Exact` uses the exhaustive
/// distance on both legs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GedMode {
    AlignedChain { node_limit: usize },
    Exact { node_limit: usize },
}

impl GedMode {
    pub fn aligned_chain() -> Self {
        GedMode::AlignedChain {
            node_limit: EXACT_GED_NODE_LIMIT,
        }
    }

    pub fn exact() -> Self {
        GedMode::Exact {
            node_limit: EXACT_GED_NODE_LIMIT,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            GedMode::AlignedChain { .. } => "aligned-chain",
            GedMode::Exact { .. } => "exact",
        }
    }
}

impl std::fmt::Display for GedMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GedMode {
    type Err = GedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "aligned-chain" => Ok(GedMode::aligned_chain()),
            "exact" => Ok(GedMode::exact()),
            other => Err(GedError::UnknownName {
                what: "ged mode",
                value: other.to_string(),
                expected: "aligned-chain, exact",
            }),
        }
    }
}

fn check_widths(ga: &Graph, gb: &Graph) -> Result<(), GedError> {
    if ga.feature_dim() != gb.feature_dim() {
        return Err(GedError::FeatureWidthMismatch {
            da: ga.feature_dim(),
            db: gb.feature_dim(),
        });
    }
    Ok(())
}

/// Identity-correspondence edit distance between graphs on the same node
/// set.
pub fn aligned_ged(ga: &Graph, gb: &Graph) -> Result<f64, GedError> {
    if ga.n() != gb.n() {
        return Err(GedError::NodeCountMismatch {
            na: ga.n(),
            nb: gb.n(),
        });
    }
    check_widths(ga, gb)?;
    let edges = ga
        .adjacency()
        .iter()
        .zip(gb.adjacency())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>();
    let feats = ga
        .features()
        .iter()
        .zip(gb.features())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>();
    Ok(edges + feats)
}

/// Outcome of the exhaustive search: the minimal cost and its witness.
/// `mapping[i]` is the `gb` node that `ga` node `i` maps to, or `None`
/// for deletion. Among minimal witnesses, the lexicographically smallest
/// is returned (targets ascending, then deletion).
#[derive(Clone, Debug, PartialEq)]
pub struct GedResult {
    pub cost: f64,
    pub mapping: Vec<Option<usize>>,
}

struct Search<'a> {
    a: &'a crate::Matrix,
    b: &'a crate::Matrix,
    sub_cost: Vec<Vec<f64>>,
    del_cost: Vec<f64>,
    ins_cost: Vec<f64>,
    assigned: Vec<Option<usize>>,
    used: Vec<bool>,
    best_cost: f64,
    best_map: Vec<Option<usize>>,
}

impl Search<'_> {
    fn leftover(&self) -> f64 {
        let nb = self.used.len();
        let mut total = 0.0;
        for j in 0..nb {
            if !self.used[j] {
                total += self.ins_cost[j];
            }
        }
        for j1 in 0..nb {
            for j2 in 0..nb {
                if !(self.used[j1] && self.used[j2]) {
                    total += self.b[[j1, j2]];
                }
            }
        }
        total
    }

    fn dfs(&mut self, k: usize, cost: f64) {
        if cost >= self.best_cost {
            return;
        }
        if k == self.assigned.len() {
            let total = cost + self.leftover();
            if total < self.best_cost {
                self.best_cost = total;
                self.best_map = self.assigned.clone();
            }
            return;
        }
        for j in 0..self.used.len() {
            if self.used[j] {
                continue;
            }
            let mut step = self.sub_cost[k][j];
            for i in 0..k {
                step += match self.assigned[i] {
                    Some(ji) => 2.0 * (self.a[[k, i]] - self.b[[j, ji]]).abs(),
                    None => 2.0 * self.a[[k, i]],
                };
            }
            self.assigned[k] = Some(j);
            self.used[j] = true;
            self.dfs(k + 1, cost + step);
            self.used[j] = false;
        }
        // Deletion: every ordered edge slot touching k is torn down.
        let mut step = self.del_cost[k];
        for i in 0..k {
            step += 2.0 * self.a[[k, i]];
        }
        self.assigned[k] = None;
        self.dfs(k + 1, cost + step);
    }
}

/// Minimal-cost partial injective node mapping between two small graphs,
/// found by exhaustive depth-first search with branch-and-bound pruning.
pub fn exact_ged(ga: &Graph, gb: &Graph, node_limit: usize) -> Result<GedResult, GedError> {
    check_widths(ga, gb)?;
    for g in [ga, gb] {
        if g.n() > node_limit {
            return Err(GedError::SizeAboveLimit {
                n: g.n(),
                limit: node_limit,
            });
        }
    }
    let (na, nb) = (ga.n(), gb.n());
    let sq_norm = |row: ndarray::ArrayView1<f64>| row.iter().map(|v| v * v).sum::<f64>();
    let sub_cost: Vec<Vec<f64>> = (0..na)
        .map(|i| {
            (0..nb)
                .map(|j| {
                    ga.features()
                        .row(i)
                        .iter()
                        .zip(gb.features().row(j))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                })
                .collect()
        })
        .collect();
    let del_cost: Vec<f64> = (0..na).map(|i| sq_norm(ga.features().row(i))).collect();
    let ins_cost: Vec<f64> = (0..nb).map(|j| sq_norm(gb.features().row(j))).collect();
    let mut search = Search {
        a: ga.adjacency(),
        b: gb.adjacency(),
        sub_cost,
        del_cost,
        ins_cost,
        assigned: vec![None; na],
        used: vec![false; nb],
        best_cost: f64::INFINITY,
        best_map: vec![None; na],
    };
    search.dfs(0, 0.0);
    Ok(GedResult {
        cost: search.best_cost,
        mapping: search.best_map,
    })
}

/// A mixed graph's relative position between its parents in edit space.
/// `epsilon = d2 / (d1 + d2)`, where `d1` is the distance to G1 and `d2`
/// the distance to G2; 1 means "at G1", 0 means "at G2".
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedGed {
    pub epsilon: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Measures where `gmix` sits between `g1` and `g2`. Aligned-chain mode
/// needs `g2_aligned` (the transplanted G2 on G1's node set) for the G2
/// leg; exact mode ignores it.
pub fn normalized_ged(
    gmix: &Graph,
    g1: &Graph,
    g2: &Graph,
    g2_aligned: Option<&Graph>,
    mode: &GedMode,
) -> Result<NormalizedGed, GedError> {
    let (d1, d2) = match *mode {
        GedMode::Exact { node_limit } => (
            exact_ged(gmix, g1, node_limit)?.cost,
            exact_ged(gmix, g2, node_limit)?.cost,
        ),
        GedMode::AlignedChain { node_limit } => {
            let ga = g2_aligned.ok_or(GedError::MissingAligned)?;
            (
                aligned_ged(gmix, g1)?,
                aligned_ged(gmix, ga)? + exact_ged(ga, g2, node_limit)?.cost,
            )
        }
    };
    if d1 + d2 == 0.0 {
        return Err(GedError::DegenerateNormalization);
    }
    Ok(NormalizedGed {
        epsilon: d2 / (d1 + d2),
        d1,
        d2,
    })
}

/// Worst-case drift of the normalized position from the mixing ratio:
/// `(1−λ)·GED(G2,G′2) / (GED(G1,G′2) + GED(G2,G′2))`, measuring the legs
/// per `mode`. Lies in `[0, 1−λ]`; zero when the transplant is exact or
/// λ = 1.
pub fn theorem1_bound(
    g1: &Graph,
    g2: &Graph,
    g2_aligned: &Graph,
    lambda: f64,
    mode: &GedMode,
) -> Result<f64, GedError> {
    if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
        return Err(GedError::BadRatio { value: lambda });
    }
    let (leg1, leg2) = match *mode {
        GedMode::Exact { node_limit } => (
            exact_ged(g1, g2_aligned, node_limit)?.cost,
            exact_ged(g2, g2_aligned, node_limit)?.cost,
        ),
        GedMode::AlignedChain { node_limit } => (
            aligned_ged(g1, g2_aligned)?,
            exact_ged(g2_aligned, g2, node_limit)?.cost,
        ),
    };
    if leg1 + leg2 == 0.0 {
        return Err(GedError::DegenerateNormalization);
    }
    Ok((1.0 - lambda) * leg2 / (leg1 + leg2))
}
