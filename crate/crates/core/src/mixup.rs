//! Pairwise graph mixing: transformation of a graph under a soft
//! assignment, linear interpolation of the transformed pair, the
//! random-alignment baseline, and batch-level augmentation.
//!
//! Mixing graph pair (G1, G2) under a column-stochastic assignment `M`
//! produces an n1-node graph
//!
//! ```text
//! A′ = λ·A1 + (1−λ)·M·A2·Mᵀ    X′ = λ·X1 + (1−λ)·M·X2    y′ = λ·y1 + (1−λ)·y2
//! ```
//!
//! where `M·A2·Mᵀ` is clamped into [0,1] with a zeroed diagonal before
//! interpolation, so the convex combination stays a valid weighted graph.

use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::matcher::{
    assignment_matrix, embed_pair, AssignmentMatrix, MatcherConfig, MatcherError, MatcherParams,
    Normalizer,
};
use crate::numerics::{sample_mix_ratio, MixRatioSpec};
use crate::Matrix;

#[derive(Error, Debug)]
pub enum MixupError {
    #[error("{what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("mix ratio {value} outside [0,1]")]
    BadRatio { value: f64 },
    #[error("identity alignment needs equal node counts, got {n1} and {n2}")]
    IdentitySizeMismatch { n1: usize, n2: usize },
    #[error("learned alignment requires matcher parameters")]
    MatcherRequired,
    #[error("empty batch")]
    EmptyBatch,
    #[error("unknown {what} `{value}` (expected one of {expected})")]
    UnknownName {
        what: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("graph dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Matcher(#[from] MatcherError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// How the assignment matrix for a pair is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alignment {
    /// Matching network embeddings → column-stochastic assignment.
    Learned,
    /// Uniform-random hard permutation after padding to a common size.
    Random,
    /// Identity mapping; requires equal node counts.
    Identity,
}

impl Alignment {
    pub fn as_str(self) -> &'static str {
        match self {
            Alignment::Learned => "learned",
            Alignment::Random => "random",
            Alignment::Identity => "identity",
        }
    }
}

impl std::fmt::Display for Alignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Alignment {
    type Err = MixupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "learned" => Ok(Alignment::Learned),
            "random" => Ok(Alignment::Random),
            "identity" => Ok(Alignment::Identity),
            other => Err(MixupError::UnknownName {
                what: "alignment",
                value: other.to_string(),
                expected: "learned, random, identity",
            }),
        }
    }
}

/// Batch augmentation settings.
#[derive(Clone, Debug)]
pub struct MixupConfig {
    pub ratio_spec: MixRatioSpec,
    pub alignment: Alignment,
    /// Restrict pairing to graphs of the same class (labels stay one-hot).
    pub same_class_only: bool,
    /// Normalizer used when `alignment` is learned.
    pub normalizer: Normalizer,
    pub seed: u64,
}

impl MixupConfig {
    /// Learned alignment, Beta(α,α) on the half range, column softmax.
    pub fn new(alpha: f64, seed: u64) -> Self {
        Self {
            ratio_spec: MixRatioSpec::half(alpha),
            alignment: Alignment::Learned,
            same_class_only: false,
            normalizer: Normalizer::Softmax,
            seed,
        }
    }
}

fn check_ratio(lambda: f64) -> Result<(), MixupError> {
    if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
        return Err(MixupError::BadRatio { value: lambda });
    }
    Ok(())
}

/// Transplants `g2` onto the first graph's node set: adjacency
/// `M·A2·Mᵀ` (clamped into [0,1], diagonal zeroed, exactly symmetric),
/// features `M·X2`, label unchanged.
pub fn transform_graph(g2: &Graph, m: &AssignmentMatrix) -> Result<Graph, MixupError> {
    if m.n2() != g2.n() {
        return Err(MixupError::ShapeMismatch {
            what: "assignment columns vs g2 nodes",
            expected: (m.n1(), g2.n()),
            got: (m.n1(), m.n2()),
        });
    }
    let n1 = m.n1();
    let raw = m.matrix().dot(g2.adjacency()).dot(&m.matrix().t());
    let mut adjacency = Matrix::zeros((n1, n1));
    for i in 0..n1 {
        for j in i + 1..n1 {
            let v = raw[[i, j]].clamp(0.0, 1.0);
            adjacency[[i, j]] = v;
            adjacency[[j, i]] = v;
        }
    }
    let features = m.matrix().dot(g2.features());
    Ok(Graph::new(adjacency, features, g2.label().to_vec())?)
}

/// Mixes a pair under an explicit assignment per the module formula. The
/// output has `g1.n()` nodes.
pub fn s_mixup_pair(
    g1: &Graph,
    g2: &Graph,
    m: &AssignmentMatrix,
    lambda: f64,
) -> Result<Graph, MixupError> {
    check_ratio(lambda)?;
    if m.n1() != g1.n() {
        return Err(MixupError::ShapeMismatch {
            what: "assignment rows vs g1 nodes",
            expected: (g1.n(), m.n2()),
            got: (m.n1(), m.n2()),
        });
    }
    if g1.feature_dim() != g2.feature_dim() {
        return Err(MixupError::ShapeMismatch {
            what: "pair feature widths",
            expected: (g1.n(), g1.feature_dim()),
            got: (g2.n(), g2.feature_dim()),
        });
    }
    if g1.num_classes() != g2.num_classes() {
        return Err(MixupError::ShapeMismatch {
            what: "pair class counts",
            expected: (1, g1.num_classes()),
            got: (1, g2.num_classes()),
        });
    }
    let transplanted = transform_graph(g2, m)?;
    let adjacency = g1.adjacency() * lambda + transplanted.adjacency() * (1.0 - lambda);
    let features = g1.features() * lambda + transplanted.features() * (1.0 - lambda);
    let label: Vec<f64> = g1
        .label()
        .iter()
        .zip(g2.label())
        .map(|(&a, &b)| lambda * a + (1.0 - lambda) * b)
        .collect();
    Ok(Graph::new(adjacency, features, label)?)
}

/// Pads `g` with isolated zero-feature nodes up to `n` nodes.
fn pad_graph(g: &Graph, n: usize) -> Result<Graph, MixupError> {
    if g.n() == n {
        return Ok(g.clone());
    }
    let mut adjacency = Matrix::zeros((n, n));
    adjacency
        .slice_mut(ndarray::s![..g.n(), ..g.n()])
        .assign(g.adjacency());
    let mut features = Matrix::zeros((n, g.feature_dim()));
    features
        .slice_mut(ndarray::s![..g.n(), ..])
        .assign(g.features());
    Ok(Graph::new(adjacency, features, g.label().to_vec())?)
}

fn random_mixup_with_rng(
    g1: &Graph,
    g2: &Graph,
    lambda: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Graph, MixupError> {
    let n = g1.n().max(g2.n());
    let p1 = pad_graph(g1, n)?;
    let p2 = pad_graph(g2, n)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    s_mixup_pair(&p1, &p2, &AssignmentMatrix::from_permutation(&perm), lambda)
}

/// The random-alignment baseline: pads both graphs to `max(n1, n2)`,
/// relabels `g2` by a uniform-random permutation, and interpolates. The
/// output has `max(n1, n2)` nodes.
pub fn random_mixup_pair(
    g1: &Graph,
    g2: &Graph,
    lambda: f64,
    seed: u64,
) -> Result<Graph, MixupError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_mixup_with_rng(g1, g2, lambda, &mut rng)
}

/// Augments a batch: pairs each anchor `batch[i]` with `batch[shuffle[i]]`,
/// draws a fresh λ per pair, and mixes under the configured alignment.
/// Seeded wrapper around [`batch_mixup_with_rng`].
pub fn batch_mixup(
    batch: &[Graph],
    matcher: Option<(&MatcherParams, &MatcherConfig)>,
    cfg: &MixupConfig,
) -> Result<Vec<Graph>, MixupError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    batch_mixup_with_rng(batch, matcher, cfg, &mut rng)
}

/// [`batch_mixup`] driven by an external RNG stream (for callers that mix
/// afresh every epoch). Per pair, λ is drawn before any alignment
/// randomness. Outputs are ordered by anchor index; output `i` keeps
/// anchor `i`'s node count except under random alignment, where it is the
/// larger of the pair.
pub fn batch_mixup_with_rng(
    batch: &[Graph],
    matcher: Option<(&MatcherParams, &MatcherConfig)>,
    cfg: &MixupConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Graph>, MixupError> {
    if batch.is_empty() {
        return Err(MixupError::EmptyBatch);
    }
    if cfg.alignment == Alignment::Learned && matcher.is_none() {
        return Err(MixupError::MatcherRequired);
    }
    let k = batch.len();
    let mut partner: Vec<usize> = (0..k).collect();
    if cfg.same_class_only {
        let mut by_class: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, g) in batch.iter().enumerate() {
            by_class.entry(g.hard_label()).or_default().push(i);
        }
        for members in by_class.values() {
            let mut shuffled = members.clone();
            shuffled.shuffle(rng);
            for (&at, &to) in members.iter().zip(&shuffled) {
                partner[at] = to;
            }
        }
    } else {
        partner.shuffle(rng);
    }

    let mut out = Vec::with_capacity(k);
    for (i, g1) in batch.iter().enumerate() {
        let g2 = &batch[partner[i]];
        let lambda = sample_mix_ratio(&cfg.ratio_spec, rng);
        let mixed = match cfg.alignment {
            Alignment::Learned => {
                let (params, mcfg) = matcher.expect("checked above");
                let (h1, h2) = embed_pair(g1, g2, params, mcfg)?;
                let m = assignment_matrix(&h1, &h2, mcfg.metric, cfg.normalizer)?;
                s_mixup_pair(g1, g2, &m, lambda)?
            }
            Alignment::Random => random_mixup_with_rng(g1, g2, lambda, rng)?,
            Alignment::Identity => {
                if g1.n() != g2.n() {
                    return Err(MixupError::IdentitySizeMismatch {
                        n1: g1.n(),
                        n2: g2.n(),
                    });
                }
                s_mixup_pair(g1, g2, &AssignmentMatrix::identity(g1.n()), lambda)?
            }
        };
        out.push(mixed);
    }
    Ok(out)
}

/// One line of the line-oriented graph dump (JSON per line): node count,
/// row-major adjacency, row-major features, and the soft label.
#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct GraphDumpRecord {
    pub n: usize,
    pub feature_dim: usize,
    pub adjacency: Vec<f64>,
    pub features: Vec<f64>,
    pub label: Vec<f64>,
}

impl GraphDumpRecord {
    pub fn from_graph(g: &Graph) -> Self {
        Self {
            n: g.n(),
            feature_dim: g.feature_dim(),
            adjacency: g.adjacency().iter().copied().collect(),
            features: g.features().iter().copied().collect(),
            label: g.label().to_vec(),
        }
    }

    pub fn into_graph(self) -> Result<Graph, MixupError> {
        let adjacency = Matrix::from_shape_vec((self.n, self.n), self.adjacency)
            .map_err(|e| MixupError::Dump(e.to_string()))?;
        let features = Matrix::from_shape_vec((self.n, self.feature_dim), self.features)
            .map_err(|e| MixupError::Dump(e.to_string()))?;
        Ok(Graph::new(adjacency, features, self.label)?)
    }
}

/// Writes one JSON record per line.
pub fn write_graph_dump<W: Write>(graphs: &[Graph], mut w: W) -> Result<(), MixupError> {
    for g in graphs {
        let line = serde_json::to_string(&GraphDumpRecord::from_graph(g))
            .map_err(|e| MixupError::Dump(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| MixupError::Dump(e.to_string()))?;
    }
    Ok(())
}

/// Reads a dump produced by [`write_graph_dump`], revalidating each graph.
pub fn read_graph_dump<R: BufRead>(r: R) -> Result<Vec<Graph>, MixupError> {
    let mut graphs = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| MixupError::Dump(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GraphDumpRecord = serde_json::from_str(&line)
            .map_err(|e| MixupError::Dump(format!("line {}: {e}", i + 1)))?;
        graphs.push(record.into_graph()?);
    }
    Ok(graphs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::adjacency_from_edges;
    use crate::numerics::column_softmax;
    use ndarray::array;
    use rand::Rng;

    fn graph(n: usize, edges: &[(usize, usize)], features: Matrix, label: Vec<f64>) -> Graph {
        Graph::new(adjacency_from_edges(n, edges), features, label).unwrap()
    }

    fn soft_assignment(n1: usize, n2: usize, seed: u64) -> AssignmentMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores = Matrix::from_shape_fn((n1, n2), |_| rng.random_range(-1.0..1.0));
        AssignmentMatrix::new(column_softmax(&scores)).unwrap()
    }

    #[test]
    fn transform_under_identity_is_identity() {
        let g = graph(
            3,
            &[(0, 1), (1, 2)],
            array![[1.0], [2.0], [3.0]],
            vec![1.0, 0.0],
        );
        let out = transform_graph(&g, &AssignmentMatrix::identity(3)).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn transform_under_permutation_relabels() {
        let g = graph(
            3,
            &[(0, 1)],
            array![[1.0], [2.0], [3.0]],
            vec![0.0, 1.0],
        );
        let perm = [2usize, 0, 1]; // column j (g2 node) → row perm[j]
        let m = AssignmentMatrix::from_permutation(&perm);
        let out = transform_graph(&g, &m).unwrap();
        // row u of the output is g2 node perm⁻¹(u)
        let mut inv = [0usize; 3];
        for (j, &i) in perm.iter().enumerate() {
            inv[i] = j;
        }
        let expect = g.permute(&inv);
        assert_eq!(out.adjacency(), expect.adjacency());
        assert_eq!(out.features(), expect.features());
    }

    #[test]
    fn transform_uniform_soft_assignment_hand_value() {
        let g = graph(2, &[(0, 1)], array![[0.0], [1.0]], vec![1.0]);
        let m = AssignmentMatrix::new(Matrix::from_elem((2, 2), 0.5)).unwrap();
        let out = transform_graph(&g, &m).unwrap();
        // M·A2·Mᵀ = all 0.5, diagonal zeroed
        assert_eq!(out.adjacency(), &array![[0.0, 0.5], [0.5, 0.0]]);
        assert_eq!(out.features(), &array![[0.5], [0.5]]);
    }

    #[test]
    fn transform_clamps_overloaded_entries() {
        // Columns each sum to 1 but two g2 nodes pile onto row 0.
        let g = graph(3, &[(0, 1), (1, 2), (2, 0)], Matrix::zeros((3, 0)), vec![1.0]);
        let m = AssignmentMatrix::new(array![[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let out = transform_graph(&g, &m).unwrap();
        // raw M·A2·Mᵀ = [[2,2],[2,0]] → clamp → zero diagonal
        assert_eq!(out.adjacency(), &array![[0.0, 1.0], [1.0, 0.0]]);
        out.validate().unwrap();
    }

    #[test]
    fn mixed_pair_at_lambda_one_is_g1_exactly() {
        let g1 = graph(2, &[(0, 1)], array![[1.0], [0.0]], vec![1.0, 0.0]);
        let g2 = graph(3, &[], array![[0.0], [1.0], [2.0]], vec![0.0, 1.0]);
        let m = soft_assignment(2, 3, 0);
        let out = s_mixup_pair(&g1, &g2, &m, 1.0).unwrap();
        assert_eq!(out.adjacency(), g1.adjacency());
        assert_eq!(out.features(), g1.features());
        assert_eq!(out.label(), g1.label());
    }

    #[test]
    fn mixing_a_graph_with_itself_under_identity_is_identity() {
        let g = graph(3, &[(0, 2)], array![[1.0], [2.0], [3.0]], vec![0.5, 0.5]);
        for lambda in [0.0, 0.3, 0.5, 0.77, 1.0] {
            let out = s_mixup_pair(&g, &g, &AssignmentMatrix::identity(3), lambda).unwrap();
            for (a, b) in out.adjacency().iter().zip(g.adjacency()) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in out.features().iter().zip(g.features()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixed_pair_hand_example() {
        let g1 = graph(2, &[(0, 1)], array![[1.0], [0.0]], vec![1.0, 0.0]);
        let g2 = graph(2, &[], array![[0.0], [1.0]], vec![0.0, 1.0]);
        let m = AssignmentMatrix::from_permutation(&[1, 0]);
        let out = s_mixup_pair(&g1, &g2, &m, 0.5).unwrap();
        assert_eq!(out.adjacency(), &array![[0.0, 0.5], [0.5, 0.0]]);
        assert_eq!(out.features(), &array![[1.0], [0.0]]);
        assert_eq!(out.label(), &[0.5, 0.5]);
    }

    #[test]
    fn label_interpolation_is_exact() {
        let g1 = graph(2, &[(0, 1)], Matrix::zeros((2, 0)), vec![1.0, 0.0]);
        let g2 = graph(2, &[], Matrix::zeros((2, 0)), vec![0.0, 1.0]);
        for lambda in [0.5, 0.625, 0.9] {
            let out =
                s_mixup_pair(&g1, &g2, &AssignmentMatrix::identity(2), lambda).unwrap();
            assert_eq!(out.label(), &[lambda, 1.0 - lambda]);
        }
    }

    #[test]
    fn monotone_containment_before_clamping() {
        let g1 = graph(
            4,
            &[(0, 1), (1, 2), (2, 3)],
            Matrix::zeros((4, 0)),
            vec![1.0, 0.0],
        );
        let g2 = graph(3, &[(0, 1), (1, 2)], Matrix::zeros((3, 0)), vec![0.0, 1.0]);
        for seed in 0..10 {
            let m = soft_assignment(4, 3, seed);
            let raw = m.matrix().dot(g2.adjacency()).dot(&m.matrix().t());
            let lambda = 0.5 + 0.05 * seed as f64 / 10.0;
            let mixed = g1.adjacency() * lambda + &raw * (1.0 - lambda);
            for i in 0..4 {
                for j in 0..4 {
                    let lo = g1.adjacency()[[i, j]].min(raw[[i, j]]);
                    let hi = g1.adjacency()[[i, j]].max(raw[[i, j]]);
                    assert!(mixed[[i, j] ] >= lo - 1e-12 && mixed[[i, j]] <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn mixed_graphs_always_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..40 {
            let n1 = rng.random_range(2..6);
            let n2 = rng.random_range(2..6);
            let d = rng.random_range(0..3);
            let mk = |n: usize, rng: &mut ChaCha8Rng| {
                let mut a = Matrix::zeros((n, n));
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random_range(0.0..1.0) < 0.5 {
                            a[[i, j]] = 1.0;
                            a[[j, i]] = 1.0;
                        }
                    }
                }
                let x = Matrix::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
                Graph::new(a, x, vec![0.5, 0.5]).unwrap()
            };
            let g1 = mk(n1, &mut rng);
            let g2 = mk(n2, &mut rng);
            let m = soft_assignment(n1, n2, trial);
            let lambda = rng.random_range(0.0..=1.0);
            let out = s_mixup_pair(&g1, &g2, &m, lambda).unwrap();
            out.validate().unwrap();
            assert_eq!(out.n(), n1);
        }
    }

    #[test]
    fn ratio_out_of_range_is_rejected() {
        let g = graph(2, &[(0, 1)], Matrix::zeros((2, 0)), vec![1.0]);
        let m = AssignmentMatrix::identity(2);
        assert!(matches!(
            s_mixup_pair(&g, &g, &m, 1.5),
            Err(MixupError::BadRatio { .. })
        ));
        assert!(matches!(
            s_mixup_pair(&g, &g, &m, -0.1),
            Err(MixupError::BadRatio { .. })
        ));
    }

    #[test]
    fn random_mixup_pads_to_the_larger_graph() {
        let g1 = graph(2, &[(0, 1)], array![[1.0], [2.0]], vec![1.0, 0.0]);
        let g2 = graph(3, &[(0, 2)], array![[3.0], [4.0], [5.0]], vec![0.0, 1.0]);
        let out = random_mixup_pair(&g1, &g2, 0.7, 9).unwrap();
        assert_eq!(out.n(), 3);
        out.validate().unwrap();
        assert_eq!(out, random_mixup_pair(&g1, &g2, 0.7, 9).unwrap());
        assert_ne!(out, random_mixup_pair(&g1, &g2, 0.7, 10).unwrap());
    }

    #[test]
    fn random_mixup_equal_sizes_lambda_one_is_g1() {
        let g1 = graph(3, &[(0, 1)], array![[1.0], [2.0], [3.0]], vec![1.0, 0.0]);
        let g2 = graph(3, &[(1, 2)], array![[4.0], [5.0], [6.0]], vec![0.0, 1.0]);
        let out = random_mixup_pair(&g1, &g2, 1.0, 3).unwrap();
        assert_eq!(out.adjacency(), g1.adjacency());
        assert_eq!(out.features(), g1.features());
    }

    fn toy_batch() -> Vec<Graph> {
        vec![
            graph(2, &[(0, 1)], array![[1.0], [0.0]], vec![1.0, 0.0]),
            graph(3, &[(0, 1), (1, 2)], array![[0.0], [1.0], [0.5]], vec![0.0, 1.0]),
            graph(2, &[], array![[0.3], [0.6]], vec![1.0, 0.0]),
            graph(4, &[(0, 3), (1, 2)], Matrix::from_elem((4, 1), 0.2), vec![0.0, 1.0]),
        ]
    }

    fn toy_matcher() -> (MatcherParams, MatcherConfig) {
        let cfg = MatcherConfig {
            num_layers: 1,
            hidden: 4,
            ..MatcherConfig::new(1)
        };
        let params = MatcherParams::init(&cfg, 0).unwrap();
        (params, cfg)
    }

    #[test]
    fn batch_of_one_self_pairs_and_keeps_the_label() {
        let batch = vec![toy_batch()[1].clone()];
        let (params, mcfg) = toy_matcher();
        let cfg = MixupConfig::new(1.0, 4);
        let out = batch_mixup(&batch, Some((&params, &mcfg)), &cfg).unwrap();
        assert_eq!(out.len(), 1);
        for (a, b) in out[0].label().iter().zip(batch[0].label()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn learned_batch_keeps_anchor_sizes_and_is_deterministic() {
        let batch = toy_batch();
        let (params, mcfg) = toy_matcher();
        let cfg = MixupConfig::new(0.2, 7);
        let out = batch_mixup(&batch, Some((&params, &mcfg)), &cfg).unwrap();
        assert_eq!(out.len(), 4);
        for (g, o) in batch.iter().zip(&out) {
            assert_eq!(o.n(), g.n());
            o.validate().unwrap();
        }
        let again = batch_mixup(&batch, Some((&params, &mcfg)), &cfg).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn learned_batch_without_matcher_is_rejected() {
        let cfg = MixupConfig::new(1.0, 0);
        assert!(matches!(
            batch_mixup(&toy_batch(), None, &cfg),
            Err(MixupError::MatcherRequired)
        ));
    }

    #[test]
    fn random_batch_needs_no_matcher() {
        let cfg = MixupConfig {
            alignment: Alignment::Random,
            ..MixupConfig::new(1.0, 2)
        };
        let out = batch_mixup(&toy_batch(), None, &cfg).unwrap();
        assert_eq!(out.len(), 4);
        for o in &out {
            o.validate().unwrap();
        }
    }

    #[test]
    fn identity_batch_rejects_unequal_sizes() {
        let cfg = MixupConfig {
            alignment: Alignment::Identity,
            ..MixupConfig::new(1.0, 11)
        };
        // Batch with mixed sizes: some shuffle will pair 2 with 3 nodes.
        let err = batch_mixup(&toy_batch(), None, &cfg);
        assert!(matches!(err, Err(MixupError::IdentitySizeMismatch { .. })));

        // Equal sizes work.
        let batch = vec![
            graph(2, &[(0, 1)], array![[1.0], [0.0]], vec![1.0, 0.0]),
            graph(2, &[], array![[0.0], [1.0]], vec![0.0, 1.0]),
        ];
        batch_mixup(&batch, None, &cfg).unwrap();
    }

    #[test]
    fn same_class_only_keeps_labels_one_hot() {
        let batch = toy_batch();
        let cfg = MixupConfig {
            alignment: Alignment::Random,
            same_class_only: true,
            ..MixupConfig::new(1.0, 13)
        };
        let out = batch_mixup(&batch, None, &cfg).unwrap();
        for (g, o) in batch.iter().zip(&out) {
            assert_eq!(o.label(), g.label(), "pairing must stay within class");
        }
    }

    #[test]
    fn half_range_lambda_keeps_anchor_dominant() {
        // With λ ≥ 0.5 the anchor's label weight never drops below half.
        let batch = toy_batch();
        let cfg = MixupConfig {
            alignment: Alignment::Random,
            ..MixupConfig::new(0.3, 17)
        };
        for _ in 0..5 {
            let out = batch_mixup(&batch, None, &cfg).unwrap();
            for (g, o) in batch.iter().zip(&out) {
                let anchor_class = g.hard_label();
                assert!(o.label()[anchor_class] >= 0.5 - 1e-12);
            }
        }
    }

    #[test]
    fn graph_dump_round_trips() {
        let cfg = MixupConfig {
            alignment: Alignment::Random,
            ..MixupConfig::new(1.0, 19)
        };
        let out = batch_mixup(&toy_batch(), None, &cfg).unwrap();
        let mut buf = Vec::new();
        write_graph_dump(&out, &mut buf).unwrap();
        let back = read_graph_dump(buf.as_slice()).unwrap();
        assert_eq!(out, back);
    }

    #[test]
    fn alignment_names_round_trip() {
        for a in [Alignment::Learned, Alignment::Random, Alignment::Identity] {
            assert_eq!(a.as_str().parse::<Alignment>().unwrap(), a);
        }
        assert!("hungarian".parse::<Alignment>().is_err());
    }
}
