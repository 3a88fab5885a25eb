//! Reverse-mode gradient computation over dense matrices.
//!
//! A [`Record`] is a DAG of primitive matrix operations built eagerly: every
//! node's value is computed when the node is inserted, so the same record
//! serves as a forward evaluator and as a tape for exact reverse-mode
//! accumulation. Leaves are either named parameters (which receive
//! gradients) or constants (which do not). Shape agreement between operands
//! is a caller contract and violations panic; data-level failures (missing
//! or non-scalar root) are reported as errors.

use std::collections::BTreeMap;

use ndarray::{concatenate, s, Array2, Axis};

use super::{column_softmax, pairwise_similarity, Metric, NumericsError};
use crate::Matrix;

/// Probabilities below this value are clamped before taking logarithms, so
/// cross-entropy stays finite on confident wrong predictions. The gradient
/// of the clamped logarithm is zero on the clamped region.
pub const LOG_CLAMP: f64 = 1e-12;

/// Handle to a node inside one [`Record`]. Ids from different records must
/// not be mixed (indices are record-local).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    ScalarMul(usize, f64),
    /// Broadcast-add a 1×q row vector to every row of an n×q matrix.
    AddRow(usize, usize),
    Relu(usize),
    /// Elementwise ln(max(x, LOG_CLAMP)).
    Log(usize),
    ColSoftmax(usize),
    MeanRows(usize),
    SumRows(usize),
    SumAll(usize),
    Transpose(usize),
    ConcatCols(usize, usize),
    Similarity(usize, usize, Metric),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Recorded computation from named parameter/constant leaves to a scalar
/// root. See the module docs for the evaluation model.
#[derive(Default)]
pub struct Record {
    nodes: Vec<Node>,
    params: BTreeMap<String, usize>,
    root: Option<usize>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Registers a named trainable leaf. Panics on duplicate names.
    pub fn parameter(&mut self, name: impl Into<String>, value: Matrix) -> NodeId {
        let name = name.into();
        let id = self.push(value, Op::Leaf);
        let replaced = self.params.insert(name.clone(), id.0);
        assert!(replaced.is_none(), "duplicate parameter name `{name}`");
        id
    }

    /// Registers a constant leaf (no gradient).
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// 1×1 constant convenience.
    pub fn scalar_constant(&mut self, x: f64) -> NodeId {
        self.constant(Array2::from_elem((1, 1), x))
    }

    /// Current value of a node.
    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    /// Declares the loss node; must be 1×1 by the time gradients are taken.
    pub fn set_root(&mut self, id: NodeId) {
        self.root = Some(id.0);
    }

    /// Value of the root scalar, if a root has been declared.
    pub fn root_value(&self) -> Option<f64> {
        self.root.map(|r| self.nodes[r].value[[0, 0]])
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let op = Op::MatMul(a.0, b.0);
        assert_eq!(
            self.nodes[a.0].value.ncols(),
            self.nodes[b.0].value.nrows(),
            "matmul inner dimensions must agree"
        );
        let v = self.eval(&op);
        self.push(v, op)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(
            self.nodes[a.0].value.dim(),
            self.nodes[b.0].value.dim(),
            "add requires equal shapes"
        );
        let op = Op::Add(a.0, b.0);
        let v = self.eval(&op);
        self.push(v, op)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(
            self.nodes[a.0].value.dim(),
            self.nodes[b.0].value.dim(),
            "sub requires equal shapes"
        );
        let op = Op::Sub(a.0, b.0);
        let v = self.eval(&op);
        self.push(v, op)
    }

    pub fn scalar_mul(&mut self, a: NodeId, c: f64) -> NodeId {
        let op = Op::ScalarMul(a.0, c);
        let v = self.eval(&op);
        self.push(v, op)
    }

    /// Adds a 1×q bias row to every row of an n×q matrix.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let rv = self.nodes[row.0].value.dim();
        assert_eq!(rv.0, 1, "add_row bias must be a 1×q row vector");
        assert_eq!(
            self.nodes[a.0].value.ncols(),
            rv.1,
            "add_row widths must agree"
        );
        let op = Op::AddRow(a.0, row.0);
        let v = self.eval(&op);
        self.push(v, op)
    }

    /// Elementwise rectifier max(0, x); derivative at exactly 0 is 0.
    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let op = Op::Relu(a.0);
        let v = self.eval(&op);
        self.push(v, op)
    }

    /// Hinge max(0, x) — the same kernel as [`Record::relu`], named for use
    /// on margin expressions.
    pub fn hinge(&mut self, a: NodeId) -> NodeId {
        self.relu(a)
    }

    /// Elementwise clamped logarithm ln(max(x, [`LOG_CLAMP`])).
    pub fn log(&mut self, a: NodeId) -> NodeId {
        let op = Op::Log(a.0);
        let v = self.eval(&op);
        self.push(v, op)
    }

    pub fn col_softmax(&mut self, a: NodeId) -> NodeId {
        let op = Op::ColSoftmax(a.0);
        let v = self.eval(&op);
        self.push(v, op)
    }

    /// Column-wise mean over rows: n×c → 1×c.
    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        assert!(self.nodes[a.0].value.nrows() > 0, "mean over zero rows");
        let op = Op::MeanRows(a.0);
        let v = self.eval(&op);
        self.push(v, op)
    }

    /// Column-wise sum over rows: n×c → 1×c.
    pub fn sum_rows(&mut self, a: NodeId) -> NodeId {
        let op = Op::SumRows(a.0);
        let v = self.eval(&op);
        self.push(v, op)
    }

    /// Sum of all entries: n×c → 1×1.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let op = Op::SumAll(a.0);
        let v = self.eval(&op);
        self.push(v, op)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let op = Op::Transpose(a.0);
        let v = self.eval(&op);
        self.push(v, op)
    }

    /// Horizontal concatenation [a | b] (equal row counts).
    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(
            self.nodes[a.0].value.nrows(),
            self.nodes[b.0].value.nrows(),
            "concat_cols requires equal row counts"
        );
        let op = Op::ConcatCols(a.0, b.0);
        let v = self.eval(&op);
        self.push(v, op)
    }

    /// Pairwise similarity (n1×h, n2×h) → n1×n2 under `metric`; both inputs
    /// receive gradients.
    pub fn similarity(&mut self, a: NodeId, b: NodeId, metric: Metric) -> NodeId {
        assert_eq!(
            self.nodes[a.0].value.ncols(),
            self.nodes[b.0].value.ncols(),
            "similarity widths must agree"
        );
        let op = Op::Similarity(a.0, b.0, metric);
        let v = self.eval(&op);
        self.push(v, op)
    }

    fn eval(&self, op: &Op) -> Matrix {
        match *op {
            Op::Leaf => unreachable!("leaves are never re-evaluated"),
            Op::MatMul(a, b) => self.nodes[a].value.dot(&self.nodes[b].value),
            Op::Add(a, b) => &self.nodes[a].value + &self.nodes[b].value,
            Op::Sub(a, b) => &self.nodes[a].value - &self.nodes[b].value,
            Op::ScalarMul(a, c) => self.nodes[a].value.mapv(|x| x * c),
            Op::AddRow(a, r) => {
                let mut out = self.nodes[a].value.clone();
                let row = self.nodes[r].value.row(0);
                for mut orow in out.rows_mut() {
                    orow += &row;
                }
                out
            }
            Op::Relu(a) => self.nodes[a].value.mapv(|x| if x > 0.0 { x } else { 0.0 }),
            Op::Log(a) => self.nodes[a].value.mapv(|x| x.max(LOG_CLAMP).ln()),
            Op::ColSoftmax(a) => column_softmax(&self.nodes[a].value),
            Op::MeanRows(a) => {
                let v = &self.nodes[a].value;
                let n = v.nrows() as f64;
                v.sum_axis(Axis(0)).insert_axis(Axis(0)) / n
            }
            Op::SumRows(a) => self.nodes[a].value.sum_axis(Axis(0)).insert_axis(Axis(0)),
            Op::SumAll(a) => Array2::from_elem((1, 1), self.nodes[a].value.sum()),
            Op::Transpose(a) => self.nodes[a].value.t().to_owned(),
            Op::ConcatCols(a, b) => concatenate![
                Axis(1),
                self.nodes[a].value.view(),
                self.nodes[b].value.view()
            ],
            Op::Similarity(a, b, m) => {
                pairwise_similarity(&self.nodes[a].value, &self.nodes[b].value, m)
                    .expect("similarity widths checked at build time")
            }
        }
    }

    /// Recomputes every non-leaf value in insertion (topological) order.
    fn refresh(&mut self) {
        for idx in 0..self.nodes.len() {
            if matches!(self.nodes[idx].op, Op::Leaf) {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            self.nodes[idx].value = self.eval(&op);
        }
    }

    /// Exact reverse accumulation from the scalar root. Every named
    /// parameter receives a gradient of its own shape; parameters
    /// unreachable from the root receive zeros.
    pub fn gradients(&self) -> Result<BTreeMap<String, Matrix>, NumericsError> {
        let root = self.root.ok_or(NumericsError::MissingRoot)?;
        let (rr, rc) = self.nodes[root].value.dim();
        if (rr, rc) != (1, 1) {
            return Err(NumericsError::NonScalarRoot { rows: rr, cols: rc });
        }

        fn acc(slot: &mut Option<Matrix>, delta: Matrix) {
            match slot {
                Some(g) => *g += &delta,
                None => *slot = Some(delta),
            }
        }

        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root] = Some(Array2::from_elem((1, 1), 1.0));

        for idx in (0..=root).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match self.nodes[idx].op {
                Op::Leaf => {
                    grads[idx] = Some(g); // keep for the parameter map
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.nodes[b].value.t());
                    let db = self.nodes[a].value.t().dot(&g);
                    acc(&mut grads[a], da);
                    acc(&mut grads[b], db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads[a], g.clone());
                    acc(&mut grads[b], g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads[a], g.clone());
                    acc(&mut grads[b], g.mapv(|x| -x));
                }
                Op::ScalarMul(a, c) => {
                    acc(&mut grads[a], g.mapv(|x| x * c));
                }
                Op::AddRow(a, r) => {
                    let dr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads[a], g);
                    acc(&mut grads[r], dr);
                }
                Op::Relu(a) => {
                    let x = &self.nodes[a].value;
                    let da = Array2::from_shape_fn(g.dim(), |(i, j)| {
                        if x[[i, j]] > 0.0 {
                            g[[i, j]]
                        } else {
                            0.0
                        }
                    });
                    acc(&mut grads[a], da);
                }
                Op::Log(a) => {
                    let x = &self.nodes[a].value;
                    let da = Array2::from_shape_fn(g.dim(), |(i, j)| {
                        if x[[i, j]] > LOG_CLAMP {
                            g[[i, j]] / x[[i, j]]
                        } else {
                            0.0
                        }
                    });
                    acc(&mut grads[a], da);
                }
                Op::ColSoftmax(a) => {
                    let y = &self.nodes[idx].value;
                    let (n, c) = y.dim();
                    let mut da = Array2::zeros((n, c));
                    for j in 0..c {
                        let mut dot = 0.0;
                        for i in 0..n {
                            dot += g[[i, j]] * y[[i, j]];
                        }
                        for i in 0..n {
                            da[[i, j]] = y[[i, j]] * (g[[i, j]] - dot);
                        }
                    }
                    acc(&mut grads[a], da);
                }
                Op::MeanRows(a) => {
                    let n = self.nodes[a].value.nrows();
                    let scale = 1.0 / n as f64;
                    let da = Array2::from_shape_fn((n, g.ncols()), |(_, j)| g[[0, j]] * scale);
                    acc(&mut grads[a], da);
                }
                Op::SumRows(a) => {
                    let n = self.nodes[a].value.nrows();
                    let da = Array2::from_shape_fn((n, g.ncols()), |(_, j)| g[[0, j]]);
                    acc(&mut grads[a], da);
                }
                Op::SumAll(a) => {
                    let da = Array2::from_elem(self.nodes[a].value.dim(), g[[0, 0]]);
                    acc(&mut grads[a], da);
                }
                Op::Transpose(a) => {
                    acc(&mut grads[a], g.t().to_owned());
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.nodes[a].value.ncols();
                    let da = g.slice(s![.., 0..ca]).to_owned();
                    let db = g.slice(s![.., ca..]).to_owned();
                    acc(&mut grads[a], da);
                    acc(&mut grads[b], db);
                }
                Op::Similarity(a, b, metric) => {
                    let (da, db) = self.similarity_vjp(a, b, metric, &g, idx);
                    acc(&mut grads[a], da);
                    acc(&mut grads[b], db);
                }
            }
        }

        let mut out = BTreeMap::new();
        for (name, &idx) in &self.params {
            let g = grads[idx]
                .take()
                .unwrap_or_else(|| Array2::zeros(self.nodes[idx].value.dim()));
            out.insert(name.clone(), g);
        }
        Ok(out)
    }

    fn similarity_vjp(
        &self,
        a: usize,
        b: usize,
        metric: Metric,
        g: &Matrix,
        out_idx: usize,
    ) -> (Matrix, Matrix) {
        let u = &self.nodes[a].value;
        let v = &self.nodes[b].value;
        let (n1, h) = u.dim();
        let n2 = v.nrows();
        match metric {
            Metric::NegSqEuclidean => {
                // d/du_i = -2 Σ_j g_ij (u_i - v_j); d/dv_j = +2 Σ_i g_ij (u_i - v_j)
                let row_sums: Vec<f64> = (0..n1).map(|i| g.row(i).sum()).collect();
                let col_sums: Vec<f64> = (0..n2).map(|j| g.column(j).sum()).collect();
                let gv = g.dot(v); // n1×h
                let gtu = g.t().dot(u); // n2×h
                let mut da = Array2::zeros((n1, h));
                for i in 0..n1 {
                    for k in 0..h {
                        da[[i, k]] = -2.0 * (row_sums[i] * u[[i, k]] - gv[[i, k]]);
                    }
                }
                let mut db = Array2::zeros((n2, h));
                for j in 0..n2 {
                    for k in 0..h {
                        db[[j, k]] = -2.0 * (col_sums[j] * v[[j, k]] - gtu[[j, k]]);
                    }
                }
                (da, db)
            }
            Metric::Cosine => {
                // With û = u/‖u‖ (zero rows stay zero): S_ij = <û_i, v̂_j>,
                // dS/du_i = (v̂_j − S_ij û_i)/‖u_i‖. Zero-norm rows have the
                // constant-0 convention and receive zero gradient.
                let s = &self.nodes[out_idx].value;
                let norm_rows = |m: &Matrix| -> Vec<f64> {
                    (0..m.nrows())
                        .map(|i| m.row(i).fold(0.0, |acc, &x| acc + x * x).sqrt())
                        .collect()
                };
                let nu = norm_rows(u);
                let nv = norm_rows(v);
                let unit = |m: &Matrix, norms: &[f64]| -> Matrix {
                    Array2::from_shape_fn(m.dim(), |(i, k)| {
                        if norms[i] > 0.0 {
                            m[[i, k]] / norms[i]
                        } else {
                            0.0
                        }
                    })
                };
                let uh = unit(u, &nu);
                let vh = unit(v, &nv);
                let gvh = g.dot(&vh); // n1×h
                let gtuh = g.t().dot(&uh); // n2×h
                let gs_rows: Vec<f64> = (0..n1)
                    .map(|i| (0..n2).map(|j| g[[i, j]] * s[[i, j]]).sum())
                    .collect();
                let gs_cols: Vec<f64> = (0..n2)
                    .map(|j| (0..n1).map(|i| g[[i, j]] * s[[i, j]]).sum())
                    .collect();
                let mut da = Array2::zeros((n1, h));
                for i in 0..n1 {
                    if nu[i] > 0.0 {
                        for k in 0..h {
                            da[[i, k]] = (gvh[[i, k]] - gs_rows[i] * uh[[i, k]]) / nu[i];
                        }
                    }
                }
                let mut db = Array2::zeros((n2, h));
                for j in 0..n2 {
                    if nv[j] > 0.0 {
                        for k in 0..h {
                            db[[j, k]] = (gtuh[[j, k]] - gs_cols[j] * vh[[j, k]]) / nv[j];
                        }
                    }
                }
                (da, db)
            }
        }
    }

    /// Central-difference validation of [`Record::gradients`]: perturbs every
    /// parameter coordinate by ±eps, re-evaluates the root, and returns the
    /// maximum relative error over all coordinates, with denominator
    /// `max(1, |analytic|)`. The record is restored to its original state.
    pub fn finite_diff_check(&mut self, eps: f64) -> Result<f64, NumericsError> {
        assert!(eps > 0.0, "finite-difference step must be positive");
        let analytic = self.gradients()?;
        let names: Vec<String> = self.params.keys().cloned().collect();
        let mut max_rel: f64 = 0.0;
        for name in names {
            let idx = self.params[&name];
            let (rows, cols) = self.nodes[idx].value.dim();
            for i in 0..rows {
                for j in 0..cols {
                    let orig = self.nodes[idx].value[[i, j]];
                    self.nodes[idx].value[[i, j]] = orig + eps;
                    self.refresh();
                    let fp = self.root_value().expect("root checked by gradients");
                    self.nodes[idx].value[[i, j]] = orig - eps;
                    self.refresh();
                    let fm = self.root_value().expect("root checked by gradients");
                    self.nodes[idx].value[[i, j]] = orig;
                    let fd = (fp - fm) / (2.0 * eps);
                    let an = analytic[&name][[i, j]];
                    let rel = (fd - an).abs() / an.abs().max(1.0);
                    max_rel = max_rel.max(rel);
                }
            }
        }
        self.refresh();
        Ok(max_rel)
    }
}
