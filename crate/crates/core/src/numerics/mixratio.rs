//! Beta-distributed mixing-ratio sampling.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::NumericsError;

/// Range handling for sampled mixing ratios.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeMode {
    /// Fold the raw draw into [0.5, 1] via `max(λ', 1−λ')` (default): the
    /// anchor graph always dominates the mixture.
    Half,
    /// Keep the raw Beta draw on [0, 1].
    Full,
}

impl RangeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RangeMode::Half => "half",
            RangeMode::Full => "full",
        }
    }
}

impl fmt::Display for RangeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RangeMode {
    type Err = NumericsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "half" => Ok(RangeMode::Half),
            "full" => Ok(RangeMode::Full),
            other => Err(NumericsError::UnknownName {
                what: "lambda range mode",
                value: other.to_string(),
                expected: "half, full",
            }),
        }
    }
}

/// How mixing ratios λ are drawn: λ' ~ Beta(alpha, alpha), then folded or
/// kept raw per [`RangeMode`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixRatioSpec {
    /// Beta shape parameter; must be positive.
    pub alpha: f64,
    pub range_mode: RangeMode,
}

impl MixRatioSpec {
    pub fn new(alpha: f64, range_mode: RangeMode) -> Self {
        assert!(
            alpha > 0.0 && alpha.is_finite(),
            "mixing-ratio alpha must be a positive finite real, got {alpha}"
        );
        Self { alpha, range_mode }
    }

    /// Half-range spec, the default configuration.
    pub fn half(alpha: f64) -> Self {
        Self::new(alpha, RangeMode::Half)
    }

    /// Full-range spec.
    pub fn full(alpha: f64) -> Self {
        Self::new(alpha, RangeMode::Full)
    }
}

/// Draws one mixing ratio. The Beta(α,α) draw is constructed as a ratio of
/// two Gamma(α,1) variates, `λ' = g1/(g1+g2)`, which is valid for every
/// α > 0 (the Gamma sampler handles α < 1 via the boost identity).
///
/// Panics if `spec.alpha` is not positive (a [`MixRatioSpec`] built through
/// its constructors is always valid).
pub fn sample_mix_ratio<R: Rng + ?Sized>(spec: &MixRatioSpec, rng: &mut R) -> f64 {
    assert!(
        spec.alpha > 0.0 && spec.alpha.is_finite(),
        "mixing-ratio alpha must be a positive finite real, got {}",
        spec.alpha
    );
    let gamma = Gamma::new(spec.alpha, 1.0).expect("alpha checked positive");
    loop {
        let g1: f64 = gamma.sample(rng);
        let g2: f64 = gamma.sample(rng);
        let sum = g1 + g2;
        // Both draws can underflow to zero for very small alpha; redraw the
        // (probability ~0) degenerate case rather than divide by zero.
        if sum > 0.0 {
            let raw = g1 / sum;
            return match spec.range_mode {
                RangeMode::Half => raw.max(1.0 - raw),
                RangeMode::Full => raw,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_mode_never_below_half() {
        let spec = MixRatioSpec::half(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let l = sample_mix_ratio(&spec, &mut rng);
            assert!((0.5..=1.0).contains(&l), "lambda {l} out of [0.5,1]");
        }
    }

    #[test]
    fn uniform_alpha_half_mode_mean() {
        // Beta(1,1) is uniform; folding onto [0.5,1] gives mean 0.75.
        let spec = MixRatioSpec::half(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_mix_ratio(&spec, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!(
            (mean - 0.75).abs() < 0.01,
            "half-mode mean {mean} not within 0.75 ± 0.01"
        );
    }

    #[test]
    fn full_mode_symmetric_mean() {
        let spec = MixRatioSpec::full(2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_mix_ratio(&spec, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = MixRatioSpec::half(0.5);
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            (0..50).map(|_| sample_mix_ratio(&spec, &mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            (0..50).map(|_| sample_mix_ratio(&spec, &mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    #[should_panic(expected = "alpha must be a positive")]
    fn zero_alpha_rejected() {
        MixRatioSpec::half(0.0);
    }
}
