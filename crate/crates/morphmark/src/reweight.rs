//! Reweighting rules: transform a token distribution so green tokens gain
//! probability mass.
//!
//! Two rules are implemented. The adaptive rule scales green entries by
//! 1 + r(1-pg)/pg and red entries by 1-r, which moves exactly r(1-pg) of
//! mass onto the green list. The fixed-boost rule multiplies green entries
//! by e^delta and renormalizes. Both preserve within-list probability
//! ratios.

use crate::partition::GreenRedPartition;
use crate::Error;

/// Green masses this close to 0 or 1 leave no mass to move; the reweighting
/// rules return their input unchanged there.
pub(crate) const PG_DEGENERATE_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn pg_is_degenerate(pg: f64) -> bool {
    pg <= PG_DEGENERATE_TOL || pg >= 1.0 - PG_DEGENERATE_TOL
}

/// Probability vector over the vocabulary. Construction validates
/// non-negativity and normalization; operations renormalize their outputs so
/// the invariant survives floating-point drift.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

impl TokenDistribution {
    /// Validate and wrap a probability vector. Entries must be non-negative
    /// and sum to 1 within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self, Error> {
        let mut sum = 0.0;
        for (index, &value) in probs.iter().enumerate() {
            // Also rejects NaN.
            if value.is_nan() || value < 0.0 {
                return Err(Error::NegativeProbability { index, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized { sum });
        }
        Ok(TokenDistribution { probs })
    }

    /// Wrap a non-negative weight vector, dividing by its sum.
    ///
    /// # Panics
    /// If the weights are not finite and non-negative with a positive sum.
    pub(crate) fn from_weights(mut weights: Vec<f64>) -> Self {
        let sum: f64 = weights.iter().sum();
        assert!(
            sum.is_finite() && sum > 0.0,
            "weight vector must have positive finite sum, got {sum}"
        );
        for w in &mut weights {
            debug_assert!(*w >= 0.0);
            *w /= sum;
        }
        TokenDistribution { probs: weights }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Fixed-boost configuration: green logits gain `delta` before softmax,
/// i.e. green probabilities are scaled by e^delta.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KgwConfig {
    pub delta: f64,
}

impl Default for KgwConfig {
    fn default() -> Self {
        KgwConfig { delta: 1.25 }
    }
}

/// Total probability mass on green tokens.
///
/// # Panics
/// If distribution and partition lengths differ.
pub fn green_mass(dist: &TokenDistribution, part: &GreenRedPartition) -> f64 {
    assert_eq!(
        dist.len(),
        part.vocab_size,
        "distribution length must match partition vocab size"
    );
    dist.probs()
        .iter()
        .zip(&part.green_mask)
        .filter(|(_, &g)| g)
        .map(|(&p, _)| p)
        .sum()
}

/// Adaptive reweighting at strength `r`: green entries scale by
/// 1 + r(1-pg)/pg, red entries by 1-r, moving green mass from pg to
/// pg + r(1-pg). Degenerate green mass (0 or 1) returns the input unchanged.
///
/// # Panics
/// If `r` is outside (0, 1) or lengths mismatch.
pub fn morphmark_reweight(
    dist: &TokenDistribution,
    part: &GreenRedPartition,
    r: f64,
) -> TokenDistribution {
    assert!(r > 0.0 && r < 1.0, "r must be in (0, 1), got {r}");
    let pg = green_mass(dist, part);
    if pg_is_degenerate(pg) {
        return dist.clone();
    }
    let green_scale = 1.0 + r * (1.0 - pg) / pg;
    let red_scale = 1.0 - r;
    let weights = dist
        .probs()
        .iter()
        .zip(&part.green_mask)
        .map(|(&p, &g)| if g { p * green_scale } else { p * red_scale })
        .collect();
    TokenDistribution::from_weights(weights)
}

/// Fixed-boost reweighting: p_i e^delta / Z for green, p_i / Z for red.
///
/// # Panics
/// If `cfg.delta` is negative or lengths mismatch.
pub fn kgw_reweight(
    dist: &TokenDistribution,
    part: &GreenRedPartition,
    cfg: KgwConfig,
) -> TokenDistribution {
    assert!(cfg.delta >= 0.0, "delta must be non-negative");
    assert_eq!(dist.len(), part.vocab_size);
    let boost = cfg.delta.exp();
    let weights = dist
        .probs()
        .iter()
        .zip(&part.green_mask)
        .map(|(&p, &g)| if g { p * boost } else { p })
        .collect();
    TokenDistribution::from_weights(weights)
}

/// KL divergence from the original to the fixed-boost output,
/// sum p_i ln(p_i / p_hat_i) = ln Z - pg * delta with
/// Z = pg e^delta + (1 - pg). Closed form; only depends on the green mass.
pub fn kgw_kl_distortion(pg: f64, delta: f64) -> f64 {
    let z = pg * delta.exp() + (1.0 - pg);
    z.ln() - pg * delta
}
