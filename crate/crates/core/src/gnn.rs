//! Message-passing classifier backbones (GCN, GIN) on weighted dense
//! adjacency, graph readout, a softmax classification head, and
//! soft-target cross-entropy.
//!
//! Two parallel implementations of the forward pass exist on purpose: the
//! plain functions here ([`gcn_layer`], [`gin_layer`], [`classifier_forward`])
//! evaluate directly on matrices, while [`classifier_loss_record`] rebuilds
//! the same computation on a [`Record`] for gradient computation. Tests pin
//! the two against each other.

use std::collections::BTreeMap;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::Graph;
use crate::numerics::{NodeId, Record, LOG_CLAMP};
use crate::Matrix;

/// GIN's aggregation weight on the central node, `(1+ε)·h_i`. Fixed to the
/// GIN-0 variant.
pub const GIN_EPS: f64 = 0.0;

#[derive(Error, Debug)]
pub enum GnnError {
    #[error("invalid config: {reason}")]
    BadConfig { reason: String },
    #[error("adjacency is not symmetric at ({i},{j})")]
    AsymmetricAdjacency { i: usize, j: usize },
    #[error("adjacency entry ({i},{j}) = {value} is negative")]
    NegativeAdjacency { i: usize, j: usize, value: f64 },
    #[error("{what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("readout of an empty graph")]
    EmptyReadout,
    #[error("empty batch")]
    EmptyBatch,
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
}

/// Classifier backbone family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backbone {
    Gcn,
    Gin,
}

impl Backbone {
    pub fn as_str(self) -> &'static str {
        match self {
            Backbone::Gcn => "gcn",
            Backbone::Gin => "gin",
        }
    }
}

impl std::fmt::Display for Backbone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backbone {
    type Err = GnnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gcn" => Ok(Backbone::Gcn),
            "gin" => Ok(Backbone::Gin),
            other => Err(GnnError::UnknownName {
                what: "backbone",
                value: other.to_string(),
                expected: "gcn, gin",
            }),
        }
    }
}

/// Graph-level pooling mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Readout {
    Mean,
    Sum,
}

impl Readout {
    pub fn as_str(self) -> &'static str {
        match self {
            Readout::Mean => "mean",
            Readout::Sum => "sum",
        }
    }
}

impl std::fmt::Display for Readout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Readout {
    type Err = GnnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Readout::Mean),
            "sum" => Ok(Readout::Sum),
            other => Err(GnnError::UnknownName {
                what: "readout",
                value: other.to_string(),
                expected: "mean, sum",
            }),
        }
    }
}

/// Architecture of a graph classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnConfig {
    pub backbone: Backbone,
    pub num_layers: usize,
    pub hidden: usize,
    pub readout: Readout,
    pub num_classes: usize,
    pub feature_dim: usize,
}

impl GnnConfig {
    /// Standard architecture (4 layers, hidden 32, mean readout) for the
    /// given backbone and data dimensions.
    pub fn new(backbone: Backbone, num_classes: usize, feature_dim: usize) -> Self {
        Self {
            backbone,
            num_layers: 4,
            hidden: 32,
            readout: Readout::Mean,
            num_classes,
            feature_dim,
        }
    }

    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |reason: &str| {
            Err(GnnError::BadConfig {
                reason: reason.to_string(),
            })
        };
        if self.num_layers < 1 {
            return bad("num_layers must be at least 1");
        }
        if self.hidden < 1 {
            return bad("hidden width must be at least 1");
        }
        if self.num_classes < 1 {
            return bad("num_classes must be at least 1");
        }
        Ok(())
    }

    /// Input width of message-passing layer `l`.
    fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.feature_dim
        } else {
            self.hidden
        }
    }
}

/// One affine map: `x·weight + bias` with `bias` stored as a 1×out row.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineParams {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl AffineParams {
    fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self {
            weight: Matrix::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit)),
            bias: Matrix::zeros((1, fan_out)),
        }
    }
}

/// Parameters of one message-passing layer.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams {
    Gcn(AffineParams),
    /// Two-layer perceptron with a rectifier between the layers.
    Gin {
        mlp1: AffineParams,
        mlp2: AffineParams,
    },
}

/// Full parameter set of a classifier: message-passing layers plus the
/// affine classification head.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnParams {
    pub layers: Vec<LayerParams>,
    pub head: AffineParams,
}

impl GnnParams {
    /// Glorot-uniform layer weights, zero biases, deterministic in `seed`.
    /// The classification head starts at zero so the initial predictive
    /// distribution is exactly uniform whatever the activation scale —
    /// sum aggregation grows activations with node degree, and a random
    /// head would saturate the softmax before training begins.
    pub fn init(cfg: &GnnConfig, seed: u64) -> Result<Self, GnnError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for l in 0..cfg.num_layers {
            let p = cfg.layer_input(l);
            layers.push(match cfg.backbone {
                Backbone::Gcn => LayerParams::Gcn(AffineParams::glorot(&mut rng, p, cfg.hidden)),
                Backbone::Gin => LayerParams::Gin {
                    mlp1: AffineParams::glorot(&mut rng, p, cfg.hidden),
                    mlp2: AffineParams::glorot(&mut rng, cfg.hidden, cfg.hidden),
                },
            });
        }
        let head = AffineParams {
            weight: Matrix::zeros((cfg.hidden, cfg.num_classes)),
            bias: Matrix::zeros((1, cfg.num_classes)),
        };
        Ok(Self { layers, head })
    }

    /// Flattens to named matrices (`layer{l}.weight`, `layer{l}.mlp1.bias`,
    /// `head.weight`, ...) for the optimizer and checkpoints.
    pub fn to_named(&self) -> BTreeMap<String, Matrix> {
        let mut named = BTreeMap::new();
        for (l, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerParams::Gcn(a) => {
                    named.insert(format!("layer{l}.weight"), a.weight.clone());
                    named.insert(format!("layer{l}.bias"), a.bias.clone());
                }
                LayerParams::Gin { mlp1, mlp2 } => {
                    named.insert(format!("layer{l}.mlp1.weight"), mlp1.weight.clone());
                    named.insert(format!("layer{l}.mlp1.bias"), mlp1.bias.clone());
                    named.insert(format!("layer{l}.mlp2.weight"), mlp2.weight.clone());
                    named.insert(format!("layer{l}.mlp2.bias"), mlp2.bias.clone());
                }
            }
        }
        named.insert("head.weight".to_string(), self.head.weight.clone());
        named.insert("head.bias".to_string(), self.head.bias.clone());
        named
    }

    /// Rebuilds structured parameters from named matrices, verifying that
    /// names and shapes exactly match `cfg`.
    pub fn from_named(
        cfg: &GnnConfig,
        named: &BTreeMap<String, Matrix>,
    ) -> Result<Self, GnnError> {
        cfg.validate()?;
        let mut taken: Vec<&str> = Vec::new();
        let mut fetch = |name: String, shape: (usize, usize)| -> Result<Matrix, GnnError> {
            let m = named
                .get(&name)
                .ok_or(GnnError::MissingParam { name: name.clone() })?;
            if m.dim() != shape {
                return Err(GnnError::ShapeMismatch {
                    what: "named parameter",
                    expected: shape,
                    got: m.dim(),
                });
            }
            taken.push(named.get_key_value(&name).unwrap().0);
            Ok(m.clone())
        };
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for l in 0..cfg.num_layers {
            let p = cfg.layer_input(l);
            let h = cfg.hidden;
            layers.push(match cfg.backbone {
                Backbone::Gcn => LayerParams::Gcn(AffineParams {
                    weight: fetch(format!("layer{l}.weight"), (p, h))?,
                    bias: fetch(format!("layer{l}.bias"), (1, h))?,
                }),
                Backbone::Gin => LayerParams::Gin {
                    mlp1: AffineParams {
                        weight: fetch(format!("layer{l}.mlp1.weight"), (p, h))?,
                        bias: fetch(format!("layer{l}.mlp1.bias"), (1, h))?,
                    },
                    mlp2: AffineParams {
                        weight: fetch(format!("layer{l}.mlp2.weight"), (h, h))?,
                        bias: fetch(format!("layer{l}.mlp2.bias"), (1, h))?,
                    },
                },
            });
        }
        let head = AffineParams {
            weight: fetch("head.weight".to_string(), (cfg.hidden, cfg.num_classes))?,
            bias: fetch("head.bias".to_string(), (1, cfg.num_classes))?,
        };
        for name in named.keys() {
            if !taken.contains(&name.as_str()) {
                return Err(GnnError::UnexpectedParam { name: name.clone() });
            }
        }
        Ok(Self { layers, head })
    }
}

fn check_adjacency(a: &Matrix) -> Result<(), GnnError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(GnnError::ShapeMismatch {
            what: "adjacency",
            expected: (n, n),
            got: a.dim(),
        });
    }
    for i in 0..n {
        for j in 0..n {
            let v = a[[i, j]];
            if v < 0.0 {
                return Err(GnnError::NegativeAdjacency { i, j, value: v });
            }
            if v != a[[j, i]] {
                return Err(GnnError::AsymmetricAdjacency { i, j });
            }
        }
    }
    Ok(())
}

/// Symmetrically normalized adjacency with self-loops:
/// `D̂^(-1/2)·(A+I)·D̂^(-1/2)` where `D̂` holds the weighted degrees of
/// `A+I`. The degrees are at least 1, so the normalization is always
/// defined.
fn gcn_norm(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let mut hat = a.clone();
    for i in 0..n {
        hat[[i, i]] += 1.0;
    }
    let scale: Vec<f64> = (0..n).map(|i| 1.0 / hat.row(i).sum().sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            hat[[i, j]] *= scale[i] * scale[j];
        }
    }
    hat
}

fn relu(m: Matrix) -> Matrix {
    m.mapv_into(|x| x.max(0.0))
}

/// One GCN layer: `relu(D̂^(-1/2)·(A+I)·D̂^(-1/2)·H·W + bias)`.
pub fn gcn_layer(h: &Matrix, a: &Matrix, w: &Matrix, bias: &Matrix) -> Result<Matrix, GnnError> {
    check_adjacency(a)?;
    if a.nrows() != h.nrows() {
        return Err(GnnError::ShapeMismatch {
            what: "gcn features",
            expected: (a.nrows(), h.ncols()),
            got: h.dim(),
        });
    }
    if w.nrows() != h.ncols() {
        return Err(GnnError::ShapeMismatch {
            what: "gcn weight",
            expected: (h.ncols(), w.ncols()),
            got: w.dim(),
        });
    }
    if bias.dim() != (1, w.ncols()) {
        return Err(GnnError::ShapeMismatch {
            what: "gcn bias",
            expected: (1, w.ncols()),
            got: bias.dim(),
        });
    }
    Ok(relu(gcn_norm(a).dot(h).dot(w) + bias))
}

/// One GIN layer: a two-layer perceptron (rectifier between the layers,
/// linear output) applied to `(1+eps)·H + A·H`.
pub fn gin_layer(
    h: &Matrix,
    a: &Matrix,
    mlp1: &AffineParams,
    mlp2: &AffineParams,
    eps: f64,
) -> Result<Matrix, GnnError> {
    check_adjacency(a)?;
    if a.nrows() != h.nrows() {
        return Err(GnnError::ShapeMismatch {
            what: "gin features",
            expected: (a.nrows(), h.ncols()),
            got: h.dim(),
        });
    }
    if mlp1.weight.nrows() != h.ncols() {
        return Err(GnnError::ShapeMismatch {
            what: "gin mlp1 weight",
            expected: (h.ncols(), mlp1.weight.ncols()),
            got: mlp1.weight.dim(),
        });
    }
    if mlp2.weight.nrows() != mlp1.weight.ncols() {
        return Err(GnnError::ShapeMismatch {
            what: "gin mlp2 weight",
            expected: (mlp1.weight.ncols(), mlp2.weight.ncols()),
            got: mlp2.weight.dim(),
        });
    }
    let agg = h * (1.0 + eps) + a.dot(h);
    let hidden = relu(agg.dot(&mlp1.weight) + &mlp1.bias);
    Ok(hidden.dot(&mlp2.weight) + &mlp2.bias)
}

/// Column-wise mean or sum pooled into a 1×h row.
pub fn readout(h: &Matrix, mode: Readout) -> Result<Matrix, GnnError> {
    let n = h.nrows();
    if n == 0 {
        return Err(GnnError::EmptyReadout);
    }
    let mut row = Array2::zeros((1, h.ncols()));
    for r in h.rows() {
        for (j, &v) in r.iter().enumerate() {
            row[[0, j]] += v;
        }
    }
    if mode == Readout::Mean {
        row /= n as f64;
    }
    Ok(row)
}

/// Numerically shifted softmax over a 1×C row of logits.
fn softmax_row(logits: &Matrix) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Runs the message-passing stack from `H⁰ = X`, pools, applies the affine
/// head, and returns class probabilities (sums to 1).
pub fn classifier_forward(
    g: &Graph,
    params: &GnnParams,
    cfg: &GnnConfig,
) -> Result<Vec<f64>, GnnError> {
    cfg.validate()?;
    if g.feature_dim() != cfg.feature_dim {
        return Err(GnnError::ShapeMismatch {
            what: "input features",
            expected: (g.n(), cfg.feature_dim),
            got: g.features().dim(),
        });
    }
    if params.layers.len() != cfg.num_layers {
        return Err(GnnError::BadConfig {
            reason: format!(
                "params have {} layers, config asks for {}",
                params.layers.len(),
                cfg.num_layers
            ),
        });
    }
    let mut h = g.features().clone();
    for layer in &params.layers {
        h = match layer {
            LayerParams::Gcn(affine) => gcn_layer(&h, g.adjacency(), &affine.weight, &affine.bias)?,
            LayerParams::Gin { mlp1, mlp2 } => gin_layer(&h, g.adjacency(), mlp1, mlp2, GIN_EPS)?,
        };
    }
    let pooled = readout(&h, cfg.readout)?;
    let logits = pooled.dot(&params.head.weight) + &params.head.bias;
    Ok(softmax_row(&logits))
}

/// `−Σ_c y_c·ln(max(p_c, 1e-12))` for a predicted distribution `p` and a
/// (possibly soft) target `y`.
pub fn soft_cross_entropy(p: &[f64], y: &[f64]) -> f64 {
    assert_eq!(p.len(), y.len(), "class counts must match");
    -p.iter()
        .zip(y)
        .map(|(&pc, &yc)| yc * pc.max(LOG_CLAMP).ln())
        .sum::<f64>()
}

/// Ids of the classifier parameters inside a [`Record`], keyed by the same
/// names as [`GnnParams::to_named`].
pub struct RecordedClassifier {
    pub params: BTreeMap<String, NodeId>,
}

impl RecordedClassifier {
    /// Registers every classifier parameter as a named leaf.
    pub fn declare(rec: &mut Record, params: &GnnParams) -> Self {
        let mut ids = BTreeMap::new();
        for (name, value) in params.to_named() {
            let id = rec.parameter(name.clone(), value);
            ids.insert(name, id);
        }
        Self { params: ids }
    }

    fn affine(&self, rec: &mut Record, x: NodeId, prefix: &str) -> NodeId {
        let z = rec.matmul(x, self.params[&format!("{prefix}.weight")]);
        rec.add_row(z, self.params[&format!("{prefix}.bias")])
    }

    /// Appends one graph's forward pass to `rec`, returning the 1×1 loss
    /// node `−Σ_c y_c·ln(softmax(logits)_c)`.
    pub fn graph_loss(&self, rec: &mut Record, g: &Graph, cfg: &GnnConfig) -> NodeId {
        let mut h = rec.constant(g.features().clone());
        for l in 0..cfg.num_layers {
            h = match cfg.backbone {
                Backbone::Gcn => {
                    let norm = rec.constant(gcn_norm(g.adjacency()));
                    let prop = rec.matmul(norm, h);
                    let z = self.affine(rec, prop, &format!("layer{l}"));
                    rec.relu(z)
                }
                Backbone::Gin => {
                    let a = rec.constant(g.adjacency().clone());
                    let neighbors = rec.matmul(a, h);
                    let scaled = rec.scalar_mul(h, 1.0 + GIN_EPS);
                    let agg = rec.add(scaled, neighbors);
                    let z1 = self.affine(rec, agg, &format!("layer{l}.mlp1"));
                    let hidden = rec.relu(z1);
                    self.affine(rec, hidden, &format!("layer{l}.mlp2"))
                }
            };
        }
        let pooled = match cfg.readout {
            Readout::Mean => rec.mean_rows(h),
            Readout::Sum => rec.sum_rows(h),
        };
        let logits = self.affine(rec, pooled, "head");
        let logits_col = rec.transpose(logits);
        let probs = rec.col_softmax(logits_col);
        let logp = rec.log(probs);
        let y = rec.constant(
            Matrix::from_shape_vec((1, g.num_classes()), g.label().to_vec())
                .expect("label length matches declared shape"),
        );
        let ce = rec.matmul(y, logp);
        rec.scalar_mul(ce, -1.0)
    }
}

/// Builds a fresh [`Record`] whose root is the mean soft cross-entropy of
/// `batch` under the classifier, ready for [`Record::gradients`].
pub fn classifier_loss_record(
    batch: &[Graph],
    params: &GnnParams,
    cfg: &GnnConfig,
) -> Result<Record, GnnError> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(GnnError::EmptyBatch);
    }
    for g in batch {
        if g.feature_dim() != cfg.feature_dim {
            return Err(GnnError::ShapeMismatch {
                what: "batch features",
                expected: (g.n(), cfg.feature_dim),
                got: g.features().dim(),
            });
        }
    }
    let mut rec = Record::new();
    let model = RecordedClassifier::declare(&mut rec, params);
    let mut total: Option<NodeId> = None;
    for g in batch {
        let loss = model.graph_loss(&mut rec, g, cfg);
        total = Some(match total {
            Some(t) => rec.add(t, loss),
            None => loss,
        });
    }
    let mean = rec.scalar_mul(total.expect("batch is non-empty"), 1.0 / batch.len() as f64);
    rec.set_root(mean);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::adjacency_from_edges;
    use ndarray::array;

    fn tiny_graph(label: Vec<f64>) -> Graph {
        Graph::new(
            adjacency_from_edges(3, &[(0, 1), (1, 2)]),
            array![[1.0, 0.2], [0.0, -1.0], [0.5, 0.3]],
            label,
        )
        .unwrap()
    }

    #[test]
    fn gcn_single_node_hand_value() {
        let out = gcn_layer(
            &array![[2.0]],
            &Matrix::zeros((1, 1)),
            &array![[1.5]],
            &Matrix::zeros((1, 1)),
        )
        .unwrap();
        assert_eq!(out, array![[3.0]]);
    }

    #[test]
    fn gcn_two_node_hand_value() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let out = gcn_layer(
            &array![[1.0], [0.0]],
            &a,
            &array![[1.0]],
            &Matrix::zeros((1, 1)),
        )
        .unwrap();
        // Â = all-ones, D̂ = diag(2,2), normalized Â = all 0.5
        assert!((out[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((out[[1, 0]] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gcn_rectifier_clamps_negatives() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let out = gcn_layer(
            &array![[1.0], [0.0]],
            &a,
            &array![[-1.0]],
            &Matrix::zeros((1, 1)),
        )
        .unwrap();
        assert_eq!(out, array![[0.0], [0.0]]);
    }

    #[test]
    fn gcn_rejects_asymmetric_adjacency() {
        let mut a = Matrix::zeros((2, 2));
        a[[0, 1]] = 1.0;
        let err = gcn_layer(
            &Matrix::zeros((2, 1)),
            &a,
            &array![[1.0]],
            &Matrix::zeros((1, 1)),
        )
        .unwrap_err();
        assert!(matches!(err, GnnError::AsymmetricAdjacency { .. }));
    }

    fn identity_mlp() -> (AffineParams, AffineParams) {
        (
            AffineParams {
                weight: array![[1.0]],
                bias: Matrix::zeros((1, 1)),
            },
            AffineParams {
                weight: array![[1.0]],
                bias: Matrix::zeros((1, 1)),
            },
        )
    }

    #[test]
    fn gin_isolated_node_is_pure_perceptron() {
        let (m1, m2) = identity_mlp();
        let out = gin_layer(&array![[2.5]], &Matrix::zeros((1, 1)), &m1, &m2, 0.0).unwrap();
        assert_eq!(out, array![[2.5]]);
    }

    #[test]
    fn gin_weighted_pair_hand_value() {
        let (m1, m2) = identity_mlp();
        let a = array![[0.0, 0.5], [0.5, 0.0]];
        let out = gin_layer(&array![[1.0], [1.0]], &a, &m1, &m2, 0.0).unwrap();
        assert_eq!(out, array![[1.5], [1.5]]);
    }

    #[test]
    fn gin_inner_rectifier_outer_linear() {
        // mlp1 flips sign so the rectifier zeroes everything; mlp2 adds a
        // bias that must survive un-rectified.
        let m1 = AffineParams {
            weight: array![[-1.0]],
            bias: Matrix::zeros((1, 1)),
        };
        let m2 = AffineParams {
            weight: array![[1.0]],
            bias: array![[-3.0]],
        };
        let out = gin_layer(&array![[2.0]], &Matrix::zeros((1, 1)), &m1, &m2, 0.0).unwrap();
        assert_eq!(out, array![[-3.0]]);
    }

    #[test]
    fn readout_hand_values() {
        let h = array![[1.0, 3.0], [3.0, 1.0]];
        assert_eq!(readout(&h, Readout::Mean).unwrap(), array![[2.0, 2.0]]);
        assert_eq!(readout(&h, Readout::Sum).unwrap(), array![[4.0, 4.0]]);
        let single = array![[7.0, -2.0]];
        assert_eq!(readout(&single, Readout::Mean).unwrap(), single);
        assert_eq!(readout(&single, Readout::Sum).unwrap(), single);
        assert!(matches!(
            readout(&Matrix::zeros((0, 2)), Readout::Mean),
            Err(GnnError::EmptyReadout)
        ));
    }

    #[test]
    fn zero_head_gives_uniform_probabilities() {
        let g = tiny_graph(vec![1.0, 0.0]);
        let cfg = GnnConfig {
            num_layers: 2,
            hidden: 4,
            ..GnnConfig::new(Backbone::Gcn, 2, 2)
        };
        let mut params = GnnParams::init(&cfg, 0).unwrap();
        params.head.weight.fill(0.0);
        params.head.bias.fill(0.0);
        let p = classifier_forward(&g, &params, &cfg).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn probabilities_sum_to_one_and_are_deterministic() {
        for backbone in [Backbone::Gcn, Backbone::Gin] {
            let g = tiny_graph(vec![0.0, 0.0, 1.0]);
            let cfg = GnnConfig {
                num_layers: 3,
                hidden: 5,
                ..GnnConfig::new(backbone, 3, 2)
            };
            let params = GnnParams::init(&cfg, 11).unwrap();
            let p = classifier_forward(&g, &params, &cfg).unwrap();
            let q = classifier_forward(&g, &params, &cfg).unwrap();
            assert_eq!(p, q);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn weighted_fully_connected_adjacency_is_accepted() {
        let n = 4;
        let mut a = Matrix::from_elem((n, n), 0.3);
        for i in 0..n {
            a[[i, i]] = 0.0;
        }
        let g = Graph::new(a, Matrix::from_elem((n, 2), 0.5), vec![0.25, 0.75]).unwrap();
        let cfg = GnnConfig::new(Backbone::Gin, 2, 2);
        let params = GnnParams::init(&cfg, 5).unwrap();
        classifier_forward(&g, &params, &cfg).unwrap();
    }

    #[test]
    fn soft_cross_entropy_hand_values() {
        assert_eq!(soft_cross_entropy(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
        let uniform = soft_cross_entropy(&[0.5, 0.5], &[0.3, 0.7]);
        assert!((uniform - std::f64::consts::LN_2).abs() < 1e-12);
        // linearity in the target
        let p = [0.2, 0.8];
        let y1 = [1.0, 0.0];
        let y2 = [0.0, 1.0];
        let lam = 0.6;
        let mixed = [lam, 1.0 - lam];
        let lhs = soft_cross_entropy(&p, &mixed);
        let rhs = lam * soft_cross_entropy(&p, &y1) + (1.0 - lam) * soft_cross_entropy(&p, &y2);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    fn random_graph(n: usize, d: usize, c: usize, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Matrix::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_range(0.0..1.0) < 0.5 {
                    a[[i, j]] = 1.0;
                    a[[j, i]] = 1.0;
                }
            }
        }
        let x = Matrix::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let mut label = vec![0.0; c];
        label[rng.random_range(0..c)] = 1.0;
        Graph::new(a, x, label).unwrap()
    }

    #[test]
    fn layers_are_permutation_equivariant_and_forward_invariant() {
        let g = random_graph(6, 3, 2, 42);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let pg = g.permute(&perm);

        let cfg = GnnConfig {
            num_layers: 2,
            hidden: 4,
            ..GnnConfig::new(Backbone::Gcn, 2, 3)
        };
        let params = GnnParams::init(&cfg, 1).unwrap();
        let LayerParams::Gcn(affine) = &params.layers[0] else {
            unreachable!()
        };
        let out = gcn_layer(g.features(), g.adjacency(), &affine.weight, &affine.bias).unwrap();
        let pout = gcn_layer(pg.features(), pg.adjacency(), &affine.weight, &affine.bias).unwrap();
        for i in 0..g.n() {
            for k in 0..4 {
                assert!((pout[[i, k]] - out[[perm[i], k]]).abs() < 1e-9);
            }
        }

        for backbone in [Backbone::Gcn, Backbone::Gin] {
            let cfg = GnnConfig {
                num_layers: 3,
                hidden: 4,
                ..GnnConfig::new(backbone, 2, 3)
            };
            let params = GnnParams::init(&cfg, 2).unwrap();
            let p = classifier_forward(&g, &params, &cfg).unwrap();
            let pp = classifier_forward(&pg, &params, &cfg).unwrap();
            for (a, b) in p.iter().zip(&pp) {
                assert!((a - b).abs() < 1e-9, "{backbone} not invariant");
            }
        }
    }

    #[test]
    fn gin_permutation_equivariance() {
        let g = random_graph(5, 2, 2, 7);
        let perm = [4usize, 2, 0, 3, 1];
        let pg = g.permute(&perm);
        let cfg = GnnConfig {
            num_layers: 1,
            hidden: 3,
            ..GnnConfig::new(Backbone::Gin, 2, 2)
        };
        let params = GnnParams::init(&cfg, 3).unwrap();
        let LayerParams::Gin { mlp1, mlp2 } = &params.layers[0] else {
            unreachable!()
        };
        let out = gin_layer(g.features(), g.adjacency(), mlp1, mlp2, GIN_EPS).unwrap();
        let pout = gin_layer(pg.features(), pg.adjacency(), mlp1, mlp2, GIN_EPS).unwrap();
        for i in 0..g.n() {
            for k in 0..3 {
                assert!((pout[[i, k]] - out[[perm[i], k]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn record_loss_matches_plain_forward() {
        for backbone in [Backbone::Gcn, Backbone::Gin] {
            let cfg = GnnConfig {
                num_layers: 2,
                hidden: 4,
                ..GnnConfig::new(backbone, 3, 2)
            };
            let params = GnnParams::init(&cfg, 9).unwrap();
            let batch = vec![
                tiny_graph(vec![1.0, 0.0, 0.0]),
                tiny_graph(vec![0.2, 0.5, 0.3]),
            ];
            let rec = classifier_loss_record(&batch, &params, &cfg).unwrap();
            let recorded = rec.root_value().unwrap();
            let mut plain = 0.0;
            for g in &batch {
                let p = classifier_forward(g, &params, &cfg).unwrap();
                plain += soft_cross_entropy(&p, g.label());
            }
            plain /= batch.len() as f64;
            assert!(
                (recorded - plain).abs() < 1e-12,
                "{backbone}: {recorded} vs {plain}"
            );
        }
    }

    #[test]
    fn classifier_loss_passes_finite_differences() {
        for backbone in [Backbone::Gcn, Backbone::Gin] {
            let cfg = GnnConfig {
                num_layers: 2,
                hidden: 3,
                readout: Readout::Sum,
                ..GnnConfig::new(backbone, 2, 2)
            };
            // Noise every parameter (the head starts at zero, where
            // lower-layer gradients vanish identically) so the check
            // exercises a generic point.
            let mut named = GnnParams::init(&cfg, 21).unwrap().to_named();
            let mut rng = ChaCha8Rng::seed_from_u64(22);
            for m in named.values_mut() {
                m.mapv_inplace(|x| x + rng.random_range(-0.2..0.2));
            }
            let params = GnnParams::from_named(&cfg, &named).unwrap();
            let batch = vec![tiny_graph(vec![1.0, 0.0]), tiny_graph(vec![0.4, 0.6])];
            let mut rec = classifier_loss_record(&batch, &params, &cfg).unwrap();
            let err = rec.finite_diff_check(1e-5).unwrap();
            assert!(err < 1e-4, "{backbone} finite-diff error {err}");
        }
    }

    #[test]
    fn named_round_trip_and_errors() {
        for backbone in [Backbone::Gcn, Backbone::Gin] {
            let cfg = GnnConfig {
                num_layers: 2,
                hidden: 3,
                ..GnnConfig::new(backbone, 2, 4)
            };
            let params = GnnParams::init(&cfg, 13).unwrap();
            let named = params.to_named();
            let back = GnnParams::from_named(&cfg, &named).unwrap();
            assert_eq!(params, back);

            let mut missing = named.clone();
            missing.remove("head.bias");
            assert!(matches!(
                GnnParams::from_named(&cfg, &missing),
                Err(GnnError::MissingParam { .. })
            ));

            let mut extra = named.clone();
            extra.insert("stray".into(), Matrix::zeros((1, 1)));
            assert!(matches!(
                GnnParams::from_named(&cfg, &extra),
                Err(GnnError::UnexpectedParam { .. })
            ));

            let mut wrong = named.clone();
            wrong.insert("head.weight".into(), Matrix::zeros((1, 1)));
            assert!(matches!(
                GnnParams::from_named(&cfg, &wrong),
                Err(GnnError::ShapeMismatch { .. })
            ));
        }
    }

    #[test]
    fn init_is_deterministic_and_config_validated(){
        let cfg = GnnConfig::new(Backbone::Gcn, 2, 3);
        assert_eq!(
            GnnParams::init(&cfg, 4).unwrap(),
            GnnParams::init(&cfg, 4).unwrap()
        );
        let bad = GnnConfig {
            num_layers: 0,
            ..cfg
        };
        assert!(GnnParams::init(&bad, 0).is_err());
    }

    #[test]
    fn backbone_and_readout_names_round_trip() {
        assert_eq!("gcn".parse::<Backbone>().unwrap(), Backbone::Gcn);
        assert_eq!("gin".parse::<Backbone>().unwrap(), Backbone::Gin);
        assert_eq!("mean".parse::<Readout>().unwrap(), Readout::Mean);
        assert_eq!("sum".parse::<Readout>().unwrap(), Readout::Sum);
        assert!("gat".parse::<Backbone>().is_err());
        assert!("max".parse::<Readout>().is_err());
    }
}
