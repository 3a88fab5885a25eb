//! Dense numeric kernels: normalizers, similarity metrics, Beta-distributed
//! mixing-ratio sampling, and reverse-mode gradient computation with a
//! finite-difference validator.

mod mixratio;
mod normalize;
mod record;

pub use mixratio::{sample_mix_ratio, MixRatioSpec, RangeMode};
pub use normalize::{column_softmax, pairwise_similarity, sinkhorn_normalize, Metric};
pub use record::{NodeId, Record, LOG_CLAMP};

use thiserror::Error;

/// Errors from numeric kernels and the gradient recorder.
#[derive(Error, Debug)]
pub enum NumericsError {
    #[error("embedding widths differ: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("{op}: input contains non-finite entries")]
    NonFinite { op: &'static str },
    #[error("record has no root; call set_root before taking gradients")]
    MissingRoot,
    #[error("record root must be a 1x1 scalar, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },
    #[error("unknown {what} `{value}` (expected one of {expected})")]
    UnknownName {
        what: &'static str,
        value: String,
        expected: &'static str,
    },
}
