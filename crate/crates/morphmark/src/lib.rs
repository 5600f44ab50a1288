//! Green/red-list watermarking for token sequences.
//!
//! The toolkit covers the full loop: keyed vocabulary partitions
//! ([`partition`]), strength policies mapping green mass to a reweighting
//! strength ([`strength`]), the reweighting rules themselves ([`reweight`]),
//! z-score detection and ROC evaluation ([`detect`]), the quality/strength
//! trade-off analysis behind the adaptive rule ([`tradeoff`]), a synthetic
//! language model plus generation loop ([`textgen`]), and token-level
//! robustness attacks ([`attack`]).
//!
//! Everything is deterministic given explicit seeds; no ambient entropy.

pub mod attack;
pub mod detect;
pub mod partition;
pub mod reweight;
pub mod rng;
pub mod strength;
pub mod textgen;
pub mod tradeoff;

pub use attack::{delete, paraphrase, substitute, AttackKind, AttackSpec, ParaphraseEndpoint};
pub use detect::{decide, roc_metrics, score_sequence, DetectionReport, RocMetrics};
pub use partition::{derive_seed, partition, GoldenVector, GreenRedPartition};
pub use reweight::{
    green_mass, kgw_kl_distortion, kgw_reweight, morphmark_reweight, KgwConfig, TokenDistribution,
};
pub use rng::SplitMix64;
pub use strength::{strength, PolicyKind, StrengthPolicy};
pub use textgen::{
    build_lm, generate, generate_with, pg_histogram, transform, GenerationTrace, SamplerConfig,
    SyntheticLM, WatermarkMethod,
};
pub use tradeoff::{
    effectiveness, objective, optimal_r, quality_bc, quality_kl, surrogate_s,
    verify_monotonicity, MonotonicityReport, QualityMetric, TradeoffPoint, TradeoffQuery,
};

/// Errors surfaced by fallible operations. Contract violations that only a
/// caller bug can produce (bad gamma, reversed grids, ...) panic instead.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("probability at index {index} is negative ({value})")]
    NegativeProbability { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, expected 1 within 1e-9")]
    NotNormalized { sum: f64 },

    #[error("sequence of length {len} is too short to score; need at least 2 tokens")]
    SequenceTooShort { len: usize },

    #[error("token id {token} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { token: u32, vocab_size: usize },

    #[error("paraphrase attack unavailable: {reason}")]
    AttackUnavailable { reason: String },
}
