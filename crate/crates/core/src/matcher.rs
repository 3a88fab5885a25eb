//! Graph matching network: joint embedding of a graph pair via within-graph
//! and cross-graph message passing, attention-based cross messages, soft
//! assignment matrices, the triplet loss, and the matcher training loop.
//!
//! As in [`crate::gnn`], the plain forward functions double as oracles for
//! the recorded (differentiable) forward used in training; tests pin the
//! two against each other.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gnn::AffineParams;
use crate::graph::{Graph, GraphDataset};
use crate::numerics::{
    column_softmax, pairwise_similarity, sinkhorn_normalize, Metric, NodeId, NumericsError, Record,
};
use crate::optim::Adam;
use crate::Matrix;

/// Sinkhorn settings used whenever an assignment is normalized with
/// [`Normalizer::Sinkhorn`].
pub const SINKHORN_MAX_ITERS: usize = 50;
pub const SINKHORN_TOL: f64 = 1e-6;

#[derive(Error, Debug)]
pub enum MatcherError {
    #[error("invalid config: {reason}")]
    BadConfig { reason: String },
    #[error("{what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("assignment matrix invalid: {reason}")]
    BadAssignment { reason: String },
    #[error("training needs two classes and a class with two graphs (got {classes} classes, largest class {largest})")]
    NoTriplets { classes: usize, largest: usize },
    #[error("missing parameter `{name}`")]
    MissingParam { name: String },
    #[error("unexpected parameter `{name}`")]
    UnexpectedParam { name: String },
    #[error("unknown {what} `{value}` (expected one of {expected})")]
    UnknownName {
        what: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// How a similarity matrix becomes a column-stochastic assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalizer {
    /// Column-wise softmax (the default relaxation).
    Softmax,
    /// Sinkhorn scaling toward a doubly-stochastic matrix.
    Sinkhorn,
}

impl Normalizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalizer::Softmax => "softmax",
            Normalizer::Sinkhorn => "sinkhorn",
        }
    }
}

impl std::fmt::Display for Normalizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Normalizer {
    type Err = MatcherError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "softmax" => Ok(Normalizer::Softmax),
            "sinkhorn" => Ok(Normalizer::Sinkhorn),
            other => Err(MatcherError::UnknownName {
                what: "normalizer",
                value: other.to_string(),
                expected: "softmax, sinkhorn",
            }),
        }
    }
}

/// Matching-network architecture. Readout is always global sum pooling.
#[derive(Clone, Debug, PartialEq)]
pub struct MatcherConfig {
    pub num_layers: usize,
    pub hidden: usize,
    pub feature_dim: usize,
    /// Similarity metric shared by attention, assignment, and triplet loss.
    pub metric: Metric,
    pub normalizer: Normalizer,
}

impl MatcherConfig {
    /// Default architecture: 5 layers, hidden 256, cosine similarity,
    /// column-softmax assignments.
    pub fn new(feature_dim: usize) -> Self {
        Self {
            num_layers: 5,
            hidden: 256,
            feature_dim,
            metric: Metric::Cosine,
            normalizer: Normalizer::Softmax,
        }
    }

    pub fn validate(&self) -> Result<(), MatcherError> {
        if self.num_layers < 1 {
            return Err(MatcherError::BadConfig {
                reason: "num_layers must be at least 1".into(),
            });
        }
        if self.hidden < 1 {
            return Err(MatcherError::BadConfig {
                reason: "hidden width must be at least 1".into(),
            });
        }
        Ok(())
    }

    fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.feature_dim
        } else {
            self.hidden
        }
    }
}

/// One matching layer: a within-graph message weight (`A·H·msg`) and the
/// update affine applied to `[H | within | cross]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatcherLayerParams {
    pub msg: Matrix,
    pub update: AffineParams,
}

/// All matching-network weights, shared between the two graphs of a pair.
#[derive(Clone, Debug, PartialEq)]
pub struct MatcherParams {
    pub layers: Vec<MatcherLayerParams>,
}

impl MatcherParams {
    pub fn init(cfg: &MatcherConfig, seed: u64) -> Result<Self, MatcherError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let glorot = |rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Matrix::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit))
        };
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for l in 0..cfg.num_layers {
            let p = cfg.layer_input(l);
            layers.push(MatcherLayerParams {
                msg: glorot(&mut rng, p, p),
                update: AffineParams {
                    weight: glorot(&mut rng, 3 * p, cfg.hidden),
                    bias: Matrix::zeros((1, cfg.hidden)),
                },
            });
        }
        Ok(Self { layers })
    }

    pub fn to_named(&self) -> BTreeMap<String, Matrix> {
        let mut named = BTreeMap::new();
        for (l, layer) in self.layers.iter().enumerate() {
            named.insert(format!("layer{l}.msg"), layer.msg.clone());
            named.insert(format!("layer{l}.update.weight"), layer.update.weight.clone());
            named.insert(format!("layer{l}.update.bias"), layer.update.bias.clone());
        }
        named
    }

    pub fn from_named(
        cfg: &MatcherConfig,
        named: &BTreeMap<String, Matrix>,
    ) -> Result<Self, MatcherError> {
        cfg.validate()?;
        let mut expected = 0usize;
        let mut fetch = |name: String, shape: (usize, usize)| -> Result<Matrix, MatcherError> {
            expected += 1;
            let m = named
                .get(&name)
                .ok_or(MatcherError::MissingParam { name: name.clone() })?;
            if m.dim() != shape {
                return Err(MatcherError::ShapeMismatch {
                    what: "named parameter",
                    expected: shape,
                    got: m.dim(),
                });
            }
            Ok(m.clone())
        };
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for l in 0..cfg.num_layers {
            let p = cfg.layer_input(l);
            layers.push(MatcherLayerParams {
                msg: fetch(format!("layer{l}.msg"), (p, p))?,
                update: AffineParams {
                    weight: fetch(format!("layer{l}.update.weight"), (3 * p, cfg.hidden))?,
                    bias: fetch(format!("layer{l}.update.bias"), (1, cfg.hidden))?,
                },
            });
        }
        if named.len() != expected {
            let known: Vec<String> = MatcherParams { layers: layers.clone() }
                .to_named()
                .into_keys()
                .collect();
            let stray = named
                .keys()
                .find(|k| !known.contains(k))
                .expect("count mismatch implies a stray key");
            return Err(MatcherError::UnexpectedParam {
                name: stray.clone(),
            });
        }
        Ok(Self { layers })
    }
}

/// A column-stochastic soft assignment. Entry `(i, j)` is the likeness that
/// node `j` of the second graph is matched to node `i` of the first.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentMatrix(Matrix);

impl AssignmentMatrix {
    /// Validates entries in [0,1] and column sums within 1e-9 of 1.
    pub fn new(m: Matrix) -> Result<Self, MatcherError> {
        for (idx, &v) in m.indexed_iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(MatcherError::BadAssignment {
                    reason: format!("entry {idx:?} = {v} outside [0,1]"),
                });
            }
        }
        for (j, col) in m.columns().into_iter().enumerate() {
            let s: f64 = col.sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(MatcherError::BadAssignment {
                    reason: format!("column {j} sums to {s}, expected 1 within 1e-9"),
                });
            }
        }
        Ok(Self(m))
    }

    /// The n×n identity assignment.
    pub fn identity(n: usize) -> Self {
        Self(Matrix::eye(n))
    }

    /// Hard assignment sending column `j` (second-graph node) to row
    /// `perm[j]` (first-graph node). `perm` must be a permutation.
    pub fn from_permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut m = Matrix::zeros((n, n));
        for (j, &i) in perm.iter().enumerate() {
            assert!(i < n, "permutation target out of range");
            m[[i, j]] = 1.0;
        }
        assert!(
            m.rows().into_iter().all(|r| r.sum() == 1.0),
            "not a permutation"
        );
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// Rows: node count of the first graph.
    pub fn n1(&self) -> usize {
        self.0.nrows()
    }

    /// Columns: node count of the second graph.
    pub fn n2(&self) -> usize {
        self.0.ncols()
    }
}

/// Attention from each node of the first graph over the nodes of the
/// second: returns `(weights, messages)` where `weights` is n2×n1 with
/// `weights[j][i] = softmax_j(sim(h1_i, h2_j))` (each column i sums to 1)
/// and `messages` is n1×h with `μ_i = Σ_j w_ji·(h2_j − h1_i)`.
pub fn cross_graph_attention(
    h1: &Matrix,
    h2: &Matrix,
    metric: Metric,
) -> Result<(Matrix, Matrix), MatcherError> {
    let sim = pairwise_similarity(h1, h2, metric)?; // n1×n2
    let weights = column_softmax(&sim.t().to_owned()); // n2×n1, columns sum to 1
    // Σ_j w_ji·(h2_j − h1_i) = (Wᵀ·H2)_i − h1_i because Σ_j w_ji = 1.
    let messages = weights.t().dot(h2) - h1;
    Ok((weights, messages))
}

fn relu(m: Matrix) -> Matrix {
    m.mapv_into(|x| x.max(0.0))
}

fn concat3(a: &Matrix, b: &Matrix, c: &Matrix) -> Matrix {
    ndarray::concatenate![ndarray::Axis(1), a.view(), b.view(), c.view()]
}

/// Jointly embeds a pair: each layer computes within-graph messages
/// `A·H·msg`, cross messages in both directions, and the rectified affine
/// update of `[H | within | cross]`. Returns (H1 n1×h, H2 n2×h).
pub fn embed_pair(
    g1: &Graph,
    g2: &Graph,
    params: &MatcherParams,
    cfg: &MatcherConfig,
) -> Result<(Matrix, Matrix), MatcherError> {
    cfg.validate()?;
    if params.layers.len() != cfg.num_layers {
        return Err(MatcherError::BadConfig {
            reason: format!(
                "params have {} layers, config asks for {}",
                params.layers.len(),
                cfg.num_layers
            ),
        });
    }
    for g in [g1, g2] {
        if g.feature_dim() != cfg.feature_dim {
            return Err(MatcherError::ShapeMismatch {
                what: "pair features",
                expected: (g.n(), cfg.feature_dim),
                got: g.features().dim(),
            });
        }
    }
    let mut h1 = g1.features().clone();
    let mut h2 = g2.features().clone();
    for layer in &params.layers {
        let within1 = g1.adjacency().dot(&h1).dot(&layer.msg);
        let within2 = g2.adjacency().dot(&h2).dot(&layer.msg);
        let (_, cross1) = cross_graph_attention(&h1, &h2, cfg.metric)?;
        let (_, cross2) = cross_graph_attention(&h2, &h1, cfg.metric)?;
        let up = |h: &Matrix, w: &Matrix, c: &Matrix| {
            relu(concat3(h, w, c).dot(&layer.update.weight) + &layer.update.bias)
        };
        let next1 = up(&h1, &within1, &cross1);
        let next2 = up(&h2, &within2, &cross2);
        h1 = next1;
        h2 = next2;
    }
    Ok((h1, h2))
}

/// Similarity of embeddings, normalized column-stochastically.
pub fn assignment_matrix(
    h1: &Matrix,
    h2: &Matrix,
    metric: Metric,
    normalizer: Normalizer,
) -> Result<AssignmentMatrix, MatcherError> {
    let sim = pairwise_similarity(h1, h2, metric)?;
    let m = match normalizer {
        Normalizer::Softmax => column_softmax(&sim),
        Normalizer::Sinkhorn => sinkhorn_normalize(&sim, SINKHORN_MAX_ITERS, SINKHORN_TOL)?,
    };
    AssignmentMatrix::new(m)
}

/// `max(0, sim(h′_G1, h_G3) − sim(h_G1, h_G2) + margin)` on 1×h graph
/// vectors.
pub fn triplet_loss(
    h_g1: &Matrix,
    h_g2: &Matrix,
    h_g1_alt: &Matrix,
    h_g3: &Matrix,
    margin: f64,
    metric: Metric,
) -> Result<f64, MatcherError> {
    assert!(margin > 0.0, "margin must be positive");
    let pos = pairwise_similarity(h_g1, h_g2, metric)?[[0, 0]];
    let neg = pairwise_similarity(h_g1_alt, h_g3, metric)?[[0, 0]];
    Ok((neg - pos + margin).max(0.0))
}

/// The matching network rebuilt on a [`Record`]; parameter names match
/// [`MatcherParams::to_named`].
struct RecordedMatcher {
    params: BTreeMap<String, NodeId>,
}

impl RecordedMatcher {
    fn declare(rec: &mut Record, params: &MatcherParams) -> Self {
        let mut ids = BTreeMap::new();
        for (name, value) in params.to_named() {
            let id = rec.parameter(name.clone(), value);
            ids.insert(name, id);
        }
        Self { params: ids }
    }

    /// Recorded [`embed_pair`]; returns the two node-embedding ids.
    fn embed_pair(
        &self,
        rec: &mut Record,
        g1: &Graph,
        g2: &Graph,
        cfg: &MatcherConfig,
    ) -> (NodeId, NodeId) {
        let a1 = rec.constant(g1.adjacency().clone());
        let a2 = rec.constant(g2.adjacency().clone());
        let mut h1 = rec.constant(g1.features().clone());
        let mut h2 = rec.constant(g2.features().clone());
        for l in 0..cfg.num_layers {
            let msg = self.params[&format!("layer{l}.msg")];
            let uw = self.params[&format!("layer{l}.update.weight")];
            let ub = self.params[&format!("layer{l}.update.bias")];
            let cross = |rec: &mut Record, ha: NodeId, hb: NodeId| {
                let sim = rec.similarity(ha, hb, cfg.metric);
                let simt = rec.transpose(sim);
                let weights = rec.col_softmax(simt); // n_b×n_a
                let wt = rec.transpose(weights);
                let pulled = rec.matmul(wt, hb);
                rec.sub(pulled, ha)
            };
            let update = |rec: &mut Record, h: NodeId, a: NodeId, c: NodeId| {
                let prop = rec.matmul(a, h);
                let within = rec.matmul(prop, msg);
                let hw = rec.concat_cols(h, within);
                let hwc = rec.concat_cols(hw, c);
                let z = rec.matmul(hwc, uw);
                let zb = rec.add_row(z, ub);
                rec.relu(zb)
            };
            let c1 = cross(rec, h1, h2);
            let c2 = cross(rec, h2, h1);
            let n1 = update(rec, h1, a1, c1);
            let n2 = update(rec, h2, a2, c2);
            h1 = n1;
            h2 = n2;
        }
        (h1, h2)
    }

    /// Recorded triplet loss for one (G1, G2, G3) sample: embeds (G1,G2)
    /// and (G1,G3), sum-pools each embedding, and applies the hinge.
    fn triplet_loss(
        &self,
        rec: &mut Record,
        g1: &Graph,
        g2: &Graph,
        g3: &Graph,
        margin: f64,
        cfg: &MatcherConfig,
    ) -> NodeId {
        let (h1, h2) = self.embed_pair(rec, g1, g2, cfg);
        let (h1_alt, h3) = self.embed_pair(rec, g1, g3, cfg);
        let r1 = rec.sum_rows(h1);
        let r2 = rec.sum_rows(h2);
        let r1_alt = rec.sum_rows(h1_alt);
        let r3 = rec.sum_rows(h3);
        let pos = rec.similarity(r1, r2, cfg.metric);
        let neg = rec.similarity(r1_alt, r3, cfg.metric);
        let diff = rec.sub(neg, pos);
        let gamma = rec.scalar_constant(margin);
        let shifted = rec.add(diff, gamma);
        rec.hinge(shifted)
    }
}

/// Training hyperparameters for the matcher.
#[derive(Clone, Debug, PartialEq)]
pub struct MatcherTrainConfig {
    /// Triplet margin γ.
    pub margin: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MatcherTrainConfig {
    fn default() -> Self {
        Self {
            margin: 1.0,
            lr: 0.001,
            epochs: 500,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl MatcherTrainConfig {
    pub fn validate(&self) -> Result<(), MatcherError> {
        let bad = |reason: &str| {
            Err(MatcherError::BadConfig {
                reason: reason.to_string(),
            })
        };
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch size must be at least 1");
        }
        Ok(())
    }
}

/// Final parameters plus the mean batch loss of every optimization step.
#[derive(Clone, Debug)]
pub struct MatcherTrainOutput {
    pub params: MatcherParams,
    pub step_losses: Vec<f64>,
}

/// Trains the matcher by triplet sampling: uniformly pick a class with at
/// least two graphs, two distinct graphs G1, G2 from it, and a graph G3
/// from a uniformly chosen different class; average `batch_size` triplet
/// losses per step; one epoch is `ceil(|train| / batch_size)` steps;
/// Adam updates. Fully deterministic given the two seeds.
pub fn train_matcher(
    train: &GraphDataset,
    cfg: &MatcherConfig,
    init_seed: u64,
    tcfg: &MatcherTrainConfig,
) -> Result<MatcherTrainOutput, MatcherError> {
    cfg.validate()?;
    tcfg.validate()?;
    let mut pools: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, g) in train.graphs().iter().enumerate() {
        pools.entry(g.hard_label()).or_default().push(i);
    }
    let classes: Vec<usize> = pools.keys().copied().collect();
    let rich: Vec<usize> = classes
        .iter()
        .copied()
        .filter(|c| pools[c].len() >= 2)
        .collect();
    let largest = pools.values().map(Vec::len).max().unwrap_or(0);
    if classes.len() < 2 || rich.is_empty() {
        return Err(MatcherError::NoTriplets {
            classes: classes.len(),
            largest,
        });
    }

    let mut named = MatcherParams::init(cfg, init_seed)?.to_named();
    let mut adam = Adam::new(tcfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let steps_per_epoch = train.len().div_ceil(tcfg.batch_size);
    let mut step_losses = Vec::with_capacity(tcfg.epochs * steps_per_epoch);

    for _epoch in 0..tcfg.epochs {
        for _step in 0..steps_per_epoch {
            let params = MatcherParams::from_named(cfg, &named)?;
            let mut rec = Record::new();
            let model = RecordedMatcher::declare(&mut rec, &params);
            let mut total: Option<NodeId> = None;
            for _ in 0..tcfg.batch_size {
                let c = rich[rng.random_range(0..rich.len())];
                let pool = &pools[&c];
                let i1 = rng.random_range(0..pool.len());
                let mut i2 = rng.random_range(0..pool.len() - 1);
                if i2 >= i1 {
                    i2 += 1;
                }
                let mut other = rng.random_range(0..classes.len() - 1);
                let c_pos = classes.iter().position(|&x| x == c).expect("c is present");
                if other >= c_pos {
                    other += 1;
                }
                let neg_pool = &pools[&classes[other]];
                let i3 = neg_pool[rng.random_range(0..neg_pool.len())];
                let loss = model.triplet_loss(
                    &mut rec,
                    train.graph(pool[i1]),
                    train.graph(pool[i2]),
                    train.graph(i3),
                    tcfg.margin,
                    cfg,
                );
                total = Some(match total {
                    Some(t) => rec.add(t, loss),
                    None => loss,
                });
            }
            let mean = rec.scalar_mul(
                total.expect("batch size is at least 1"),
                1.0 / tcfg.batch_size as f64,
            );
            rec.set_root(mean);
            step_losses.push(rec.root_value().expect("root is set"));
            let grads = rec.gradients()?;
            adam.step(&mut named, &grads);
        }
    }
    Ok(MatcherTrainOutput {
        params: MatcherParams::from_named(cfg, &named)?,
        step_losses,
    })
}

/// Builds a fresh [`Record`] whose root is the triplet loss of
/// `(g1, g2, g3)` under the matcher, ready for [`Record::gradients`].
pub fn matcher_loss_record(
    g1: &Graph,
    g2: &Graph,
    g3: &Graph,
    margin: f64,
    params: &MatcherParams,
    cfg: &MatcherConfig,
) -> Result<Record, MatcherError> {
    cfg.validate()?;
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(MatcherError::BadConfig {
            reason: format!("margin must be positive and finite, got {margin}"),
        });
    }
    for g in [g1, g2, g3] {
        if g.feature_dim() != cfg.feature_dim {
            return Err(MatcherError::ShapeMismatch {
                what: "triplet features",
                expected: (g.n(), cfg.feature_dim),
                got: g.features().dim(),
            });
        }
    }
    let mut rec = Record::new();
    let model = RecordedMatcher::declare(&mut rec, params);
    let loss = model.triplet_loss(&mut rec, g1, g2, g3, margin, cfg);
    rec.set_root(loss);
    Ok(rec)
}
