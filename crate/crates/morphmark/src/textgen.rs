//! Synthetic language model and the watermarked generation loop.
//!
//! The LM is a Markov chain (order 0 or 1) whose conditional rows are drawn
//! from a symmetric Dirichlet; the concentration parameter spans the
//! high-entropy regime (near-uniform rows) down to spiky low-entropy rows,
//! with a deterministic cyclic chain as the degenerate extreme. Generation
//! runs the full pipeline per step: LM distribution, sampler transform,
//! keyed partition, strength policy, reweighting, inverse-CDF sampling.

use rand::distributions::Distribution;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::partition::{derive_seed, partition};
use crate::reweight::{
    green_mass, kgw_kl_distortion, kgw_reweight, morphmark_reweight, pg_is_degenerate, KgwConfig,
    TokenDistribution,
};
use crate::rng::SplitMix64;
use crate::strength::{strength, StrengthPolicy};
use crate::tradeoff::quality_kl;

/// Markov-chain language model with Dirichlet-sampled rows.
#[derive(Clone, Debug)]
pub struct SyntheticLM {
    pub vocab_size: usize,
    /// Context length: 0 (one shared row) or 1 (one row per previous token).
    pub order: u8,
    /// Dirichlet concentration the table was drawn with; 0 marks the
    /// deterministic chain.
    pub entropy_param: f64,
    pub seed: u64,
    table: Vec<TokenDistribution>,
}

impl SyntheticLM {
    /// Conditional next-token distribution given the previous token.
    pub fn next_dist(&self, prev: u32) -> TokenDistribution {
        assert!(
            (prev as usize) < self.vocab_size,
            "prev token {prev} out of range for vocab {}",
            self.vocab_size
        );
        match self.order {
            0 => self.table[0].clone(),
            _ => self.table[prev as usize].clone(),
        }
    }

    /// Mean Shannon entropy (nats) of the conditional rows.
    pub fn mean_row_entropy(&self) -> f64 {
        let total: f64 = self
            .table
            .iter()
            .map(|row| {
                -row.probs()
                    .iter()
                    .filter(|&&p| p > 0.0)
                    .map(|&p| p * p.ln())
                    .sum::<f64>()
            })
            .sum();
        total / self.table.len() as f64
    }

    /// Fully deterministic cyclic chain: row v is a point mass on
    /// (v + 1) mod vocab_size. The zero-entropy extreme where no probability
    /// mass is movable and watermarking cannot act.
    pub fn deterministic_chain(vocab_size: usize) -> Self {
        assert!(vocab_size >= 2, "vocab_size must be at least 2");
        let table = (0..vocab_size)
            .map(|v| {
                let mut row = vec![0.0; vocab_size];
                row[(v + 1) % vocab_size] = 1.0;
                TokenDistribution::new(row).expect("point mass is a valid distribution")
            })
            .collect();
        SyntheticLM {
            vocab_size,
            order: 1,
            entropy_param: 0.0,
            seed: 0,
            table,
        }
    }
}

/// Draw a synthetic LM: rows i.i.d. symmetric-Dirichlet(entropy_param),
/// realized as normalized Gamma(entropy_param, 1) draws from a seeded
/// stream.
///
/// # Panics
/// If `vocab_size < 2`, `order > 1`, or `entropy_param` is not positive and
/// finite.
pub fn build_lm(vocab_size: usize, order: u8, entropy_param: f64, seed: u64) -> SyntheticLM {
    assert!(vocab_size >= 2, "vocab_size must be at least 2");
    assert!(order <= 1, "order must be 0 or 1, got {order}");
    assert!(
        entropy_param > 0.0 && entropy_param.is_finite(),
        "entropy_param must be positive and finite"
    );
    let rows = if order == 0 { 1 } else { vocab_size };
    let mut rng = SplitMix64::new(seed);
    let gamma = Gamma::new(entropy_param, 1.0).expect("valid Gamma shape");
    let table = (0..rows)
        .map(|_| {
            // Tiny concentrations can underflow single draws to 0; a whole
            // row of zeros is effectively impossible, and from_weights
            // guards it.
            let weights: Vec<f64> = (0..vocab_size).map(|_| gamma.sample(&mut rng)).collect();
            TokenDistribution::from_weights(weights)
        })
        .collect();
    SyntheticLM {
        vocab_size,
        order,
        entropy_param,
        seed,
        table,
    }
}

/// Temperature and nucleus (top-p) sampling knobs, applied to the LM
/// distribution before watermarking.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            temperature: 1.0,
            top_p: 1.0,
        }
    }
}

/// Apply temperature (power scaling via log-probs) then nucleus truncation
/// (smallest prefix of tokens, by descending probability with ties broken
/// toward lower ids, whose mass reaches top_p). The defaults are an exact
/// identity.
pub fn transform(dist: &TokenDistribution, cfg: &SamplerConfig) -> TokenDistribution {
    assert!(cfg.temperature > 0.0, "temperature must be positive");
    assert!(
        cfg.top_p > 0.0 && cfg.top_p <= 1.0,
        "top_p must be in (0, 1]"
    );
    if cfg.temperature == 1.0 && cfg.top_p == 1.0 {
        return dist.clone();
    }
    let mut weights: Vec<f64> = if cfg.temperature != 1.0 {
        let logs: Vec<f64> = dist
            .probs()
            .iter()
            .map(|&p| p.ln() / cfg.temperature)
            .collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        logs.iter().map(|&l| (l - m).exp()).collect()
    } else {
        dist.probs().to_vec()
    };
    if cfg.top_p < 1.0 {
        let sum: f64 = weights.iter().sum();
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| {
            weights[b]
                .partial_cmp(&weights[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut kept = vec![false; weights.len()];
        let mut acc = 0.0;
        for &i in &order {
            kept[i] = true;
            acc += weights[i] / sum;
            if acc >= cfg.top_p {
                break;
            }
        }
        for (i, w) in weights.iter_mut().enumerate() {
            if !kept[i] {
                *w = 0.0;
            }
        }
    }
    TokenDistribution::from_weights(weights)
}

/// Which reweighting rule the generation loop applies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WatermarkMethod {
    MorphMark(StrengthPolicy),
    Kgw(KgwConfig),
    None,
}

/// Per-sequence record of the generation loop.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationTrace {
    pub tokens: Vec<u32>,
    /// Green mass of the (transformed) step distribution, one per token.
    pub pg_per_step: Vec<f64>,
    /// Strength applied per token; empty unless the method is adaptive.
    pub r_per_step: Vec<f64>,
    /// KL divergence from the step distribution to its reweighted form, one
    /// per token; the per-token distortion the watermark paid.
    pub kl_per_step: Vec<f64>,
}

/// Inverse-CDF draw over the cumulative probability vector; on an exact
/// boundary the lower token id wins. Zero-probability tokens can never be
/// drawn.
fn sample_categorical(dist: &TokenDistribution, u: f64) -> u32 {
    debug_assert!((0.0..1.0).contains(&u));
    let mut acc = 0.0;
    let mut last = None;
    for (i, &p) in dist.probs().iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = Some(i as u32);
            if u <= acc {
                return i as u32;
            }
        }
    }
    // Rounding can leave the final cumulative a hair under u.
    last.expect("distribution must have positive mass")
}

/// Watermarked generation with the adaptive rule; see [`generate_with`] for
/// the general entry point.
#[allow(clippy::too_many_arguments)]
pub fn generate(
    lm: &SyntheticLM,
    prompt: &[u32],
    length: usize,
    key: u64,
    gamma: f64,
    policy: &StrengthPolicy,
    cfg: &SamplerConfig,
    rng_seed: u64,
) -> GenerationTrace {
    generate_with(
        lm,
        prompt,
        length,
        key,
        gamma,
        &WatermarkMethod::MorphMark(*policy),
        cfg,
        rng_seed,
    )
}

/// Run the generation loop for `length` tokens. The first step conditions on
/// the last prompt token; each step transforms the LM distribution, colors
/// the vocabulary from the previous token, reweights per `method`, and
/// samples from the seeded stream (exactly one draw per step, so token
/// output is method-independent whenever reweighting is a no-op).
///
/// # Panics
/// If the prompt is empty or contains out-of-range tokens, or `length` is 0.
#[allow(clippy::too_many_arguments)]
pub fn generate_with(
    lm: &SyntheticLM,
    prompt: &[u32],
    length: usize,
    key: u64,
    gamma: f64,
    method: &WatermarkMethod,
    cfg: &SamplerConfig,
    rng_seed: u64,
) -> GenerationTrace {
    assert!(!prompt.is_empty(), "prompt must be non-empty");
    assert!(length >= 1, "length must be at least 1");
    let mut rng = SplitMix64::new(rng_seed);
    let mut prev = *prompt.last().unwrap();
    let mut trace = GenerationTrace {
        tokens: Vec::with_capacity(length),
        pg_per_step: Vec::with_capacity(length),
        r_per_step: Vec::new(),
        kl_per_step: Vec::with_capacity(length),
    };
    for _ in 0..length {
        let dist = transform(&lm.next_dist(prev), cfg);
        let part = partition(derive_seed(key, prev), lm.vocab_size, gamma);
        let pg = green_mass(&dist, &part);
        let (sampled, kl) = match method {
            WatermarkMethod::MorphMark(policy) => {
                let r = strength(policy, pg);
                trace.r_per_step.push(r);
                let out = morphmark_reweight(&dist, &part, r);
                let kl = if pg_is_degenerate(pg) {
                    0.0
                } else {
                    -quality_kl(pg, r)
                };
                (out, kl)
            }
            WatermarkMethod::Kgw(kgw) => (
                kgw_reweight(&dist, &part, *kgw),
                kgw_kl_distortion(pg, kgw.delta),
            ),
            WatermarkMethod::None => (dist, 0.0),
        };
        let token = sample_categorical(&sampled, rng.next_f64());
        trace.tokens.push(token);
        trace.pg_per_step.push(pg);
        trace.kl_per_step.push(kl);
        prev = token;
    }
    trace
}

/// Normalized histogram of all per-step green masses across traces, over
/// `bins` equal-width bins on [0, 1] (pg = 1 lands in the last bin).
pub fn pg_histogram(traces: &[GenerationTrace], bins: usize) -> Vec<f64> {
    assert!(bins >= 1, "need at least one bin");
    let mut counts = vec![0usize; bins];
    for trace in traces {
        for &pg in &trace.pg_per_step {
            let idx = ((pg * bins as f64) as usize).min(bins - 1);
            counts[idx] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return vec![0.0; bins];
    }
    counts
        .into_iter()
        .map(|c| c as f64 / total as f64)
        .collect()
}
