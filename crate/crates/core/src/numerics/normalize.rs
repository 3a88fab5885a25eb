//! Column softmax, Sinkhorn normalization, and pairwise similarity kernels.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::NumericsError;
use crate::Matrix;

/// Node-pair similarity metric, shared by cross-graph attention, assignment
/// scoring, and the triplet loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// Dot product over the product of norms; zero vectors score 0 by
    /// convention (avoids an undefined division).
    Cosine,
    /// Negative squared Euclidean distance, −‖u−v‖².
    NegSqEuclidean,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::NegSqEuclidean => "neg-sq-euclidean",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = NumericsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "neg-sq-euclidean" => Ok(Metric::NegSqEuclidean),
            other => Err(NumericsError::UnknownName {
                what: "similarity metric",
                value: other.to_string(),
                expected: "cosine, neg-sq-euclidean",
            }),
        }
    }
}

/// Column-wise softmax: each output column is `exp(col − max(col))`
/// normalized to sum 1. Max subtraction makes the kernel stable for any
/// finite input; all outputs are in (0, 1].
pub fn column_softmax(scores: &Matrix) -> Matrix {
    let (rows, cols) = scores.dim();
    let mut out = Matrix::zeros((rows, cols));
    for j in 0..cols {
        let mut max = f64::NEG_INFINITY;
        for i in 0..rows {
            max = max.max(scores[[i, j]]);
        }
        let mut denom = 0.0;
        for i in 0..rows {
            let e = (scores[[i, j]] - max).exp();
            out[[i, j]] = e;
            denom += e;
        }
        for i in 0..rows {
            out[[i, j]] /= denom;
        }
    }
    out
}

/// Sinkhorn normalization toward a column-stochastic target: scores are
/// exponentiated (scaling needs strict positivity), then rows and columns
/// are alternately rescaled until every column sums to 1 and every row sums
/// to `cols/rows`, within `tol`, or `max_iters` is reached. The column pass
/// runs last, so column sums are always the tighter of the two.
///
/// On square inputs the target is the doubly stochastic polytope; the
/// rectangular row target keeps total mass equal to the number of columns,
/// matching the column-stochastic convention of assignment matrices.
pub fn sinkhorn_normalize(
    scores: &Matrix,
    max_iters: usize,
    tol: f64,
) -> Result<Matrix, NumericsError> {
    if scores.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::NonFinite {
            op: "sinkhorn_normalize",
        });
    }
    let (rows, cols) = scores.dim();
    let row_target = cols as f64 / rows as f64;
    // Subtracting the global max before exponentiating prevents overflow and
    // does not change the iterates: a global positive factor is absorbed by
    // the very first scaling pass.
    let gmax = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut t = scores.mapv(|x| (x - gmax).exp());
    for _ in 0..max_iters {
        for i in 0..rows {
            let s: f64 = t.row(i).sum();
            if s > 0.0 {
                let f = row_target / s;
                t.row_mut(i).mapv_inplace(|x| x * f);
            }
        }
        for j in 0..cols {
            let s: f64 = t.column(j).sum();
            if s > 0.0 {
                let f = 1.0 / s;
                t.column_mut(j).mapv_inplace(|x| x * f);
            }
        }
        let mut dev: f64 = 0.0;
        for j in 0..cols {
            dev = dev.max((t.column(j).sum() - 1.0).abs());
        }
        for i in 0..rows {
            dev = dev.max((t.row(i).sum() - row_target).abs());
        }
        if dev < tol {
            break;
        }
    }
    Ok(t)
}

/// Pairwise similarity between the rows of `h1` (n1×h) and `h2` (n2×h),
/// producing an n1×n2 score matrix.
pub fn pairwise_similarity(
    h1: &Matrix,
    h2: &Matrix,
    metric: Metric,
) -> Result<Matrix, NumericsError> {
    if h1.ncols() != h2.ncols() {
        return Err(NumericsError::WidthMismatch {
            left: h1.ncols(),
            right: h2.ncols(),
        });
    }
    let (n1, n2) = (h1.nrows(), h2.nrows());
    let mut out = Matrix::zeros((n1, n2));
    match metric {
        Metric::Cosine => {
            let norm = |m: &Matrix, i: usize| m.row(i).fold(0.0, |a, &x| a + x * x).sqrt();
            let n1s: Vec<f64> = (0..n1).map(|i| norm(h1, i)).collect();
            let n2s: Vec<f64> = (0..n2).map(|j| norm(h2, j)).collect();
            for i in 0..n1 {
                for j in 0..n2 {
                    let den = n1s[i] * n2s[j];
                    if den > 0.0 {
                        let dot = h1.row(i).dot(&h2.row(j));
                        out[[i, j]] = dot / den;
                    }
                }
            }
        }
        Metric::NegSqEuclidean => {
            for i in 0..n1 {
                for j in 0..n2 {
                    let mut d = 0.0;
                    for k in 0..h1.ncols() {
                        let diff = h1[[i, k]] - h2[[j, k]];
                        d += diff * diff;
                    }
                    out[[i, j]] = -d;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn column_softmax_uniform_on_constant_columns() {
        let s = Array2::zeros((2, 2));
        let m = column_softmax(&s);
        for x in m.iter() {
            assert!((x - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn column_softmax_hand_value() {
        let l3 = 3.0f64.ln();
        let s = array![[l3, 0.0], [0.0, l3]];
        let m = column_softmax(&s);
        assert!((m[[0, 0]] - 0.75).abs() < 1e-12);
        assert!((m[[1, 0]] - 0.25).abs() < 1e-12);
        assert!((m[[0, 1]] - 0.25).abs() < 1e-12);
        assert!((m[[1, 1]] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn column_softmax_shift_invariant_and_normalized() {
        let s = array![[0.3, -1.0], [2.0, 0.5], [-0.7, 4.0]];
        let mut shifted = s.clone();
        for i in 0..3 {
            shifted[[i, 1]] += 17.5;
        }
        let a = column_softmax(&s);
        let b = column_softmax(&shifted);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        for j in 0..2 {
            let sum: f64 = a.column(j).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(a.column(j).iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn sinkhorn_fixed_point() {
        let s = array![[0.5f64, 0.5], [0.5, 0.5]].mapv(f64::ln);
        let t = sinkhorn_normalize(&s, 50, 1e-6).unwrap();
        for x in t.iter() {
            assert!((x - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sinkhorn_hand_value() {
        let s = array![[2.0f64, 1.0], [1.0, 2.0]].mapv(f64::ln);
        let t = sinkhorn_normalize(&s, 50, 1e-9).unwrap();
        assert!((t[[0, 0]] - 2.0 / 3.0).abs() < 1e-9);
        assert!((t[[0, 1]] - 1.0 / 3.0).abs() < 1e-9);
        assert!((t[[1, 0]] - 1.0 / 3.0).abs() < 1e-9);
        assert!((t[[1, 1]] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn sinkhorn_single_row() {
        let s = array![[0.4f64, -1.3]];
        let t = sinkhorn_normalize(&s, 50, 1e-6).unwrap();
        assert!((t[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((t[[0, 1]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sinkhorn_rejects_non_finite() {
        let s = array![[f64::NAN, 0.0], [0.0, 0.0]];
        assert!(sinkhorn_normalize(&s, 10, 1e-6).is_err());
    }

    #[test]
    fn cosine_hand_values() {
        let h1 = array![[1.0, 0.0]];
        let h2 = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let s = pairwise_similarity(&h1, &h2, Metric::Cosine).unwrap();
        assert!((s[[0, 0]] - 1.0).abs() < 1e-12);
        assert!(s[[0, 1]].abs() < 1e-12);
        assert!((s[[0, 2]] - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_vector_convention() {
        let h1 = array![[0.0, 0.0]];
        let h2 = array![[1.0, 2.0]];
        let s = pairwise_similarity(&h1, &h2, Metric::Cosine).unwrap();
        assert_eq!(s[[0, 0]], 0.0);
    }

    #[test]
    fn neg_sq_euclidean_values() {
        let h1 = array![[1.0, 0.0]];
        let h2 = array![[1.0, 0.0], [0.0, 1.0]];
        let s = pairwise_similarity(&h1, &h2, Metric::NegSqEuclidean).unwrap();
        assert_eq!(s[[0, 0]], 0.0);
        assert!((s[[0, 1]] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn width_mismatch_rejected() {
        let h1 = Array2::zeros((2, 3));
        let h2 = Array2::zeros((2, 4));
        assert!(pairwise_similarity(&h1, &h2, Metric::Cosine).is_err());
    }

    #[test]
    fn self_cosine_unit_diagonal() {
        let h = array![[0.3, -1.2, 0.7], [2.0, 0.1, -0.4], [-1.0, 5.0, 2.0]];
        let s = pairwise_similarity(&h, &h, Metric::Cosine).unwrap();
        for i in 0..3 {
            assert!((s[[i, i]] - 1.0).abs() < 1e-12);
        }
    }
}
