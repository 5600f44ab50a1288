//! Token-level watermark-removal attacks.
//!
//! Substitution and deletion are local, deterministic, and hit an exact
//! number of positions so attack rates in benchmarks are not themselves
//! noisy. Paraphrasing is remote-only: a pluggable HTTP endpoint rewrites
//! the token sequence, and any transport or format failure is surfaced as an
//! error rather than silently returning the input (a silent identity would
//! masquerade as a survived attack).

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Substitute,
    Delete,
    Paraphrase,
}

/// Declarative attack description, as it appears in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

/// First `count` entries of a seeded Fisher-Yates shuffle of 0..len; the
/// stream is left positioned after the shuffle so callers can keep drawing.
fn pick_positions(len: usize, count: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..len).collect();
    for i in (1..len).rev() {
        let j = rng.range(i as u64 + 1) as usize;
        indices.swap(i, j);
    }
    let mut picked = indices[..count].to_vec();
    picked.sort_unstable();
    picked
}

fn attacked_count(len: usize, rate: f64) -> usize {
    (rate * len as f64).round() as usize
}

/// Replace exactly round(rate * len) positions (chosen without replacement)
/// with uniform random token ids different from the original.
///
/// # Panics
/// If `rate` is outside [0, 1], `vocab_size < 2`, or a token is out of
/// range.
pub fn substitute(tokens: &[u32], rate: f64, rng_seed: u64, vocab_size: usize) -> Vec<u32> {
    assert!((0.0..=1.0).contains(&rate), "rate must be in [0, 1]");
    assert!(vocab_size >= 2, "vocab_size must be at least 2");
    assert!(
        tokens.iter().all(|&t| (t as usize) < vocab_size),
        "token out of vocabulary range"
    );
    let mut rng = SplitMix64::new(rng_seed);
    let mut out = tokens.to_vec();
    for pos in pick_positions(tokens.len(), attacked_count(tokens.len(), rate), &mut rng) {
        // Uniform over the vocabulary minus the original id.
        let v = rng.range(vocab_size as u64 - 1) as u32;
        out[pos] = if v >= out[pos] { v + 1 } else { v };
    }
    out
}

/// Remove exactly round(rate * len) positions, preserving order.
///
/// # Panics
/// If `rate` is outside [0, 1).
pub fn delete(tokens: &[u32], rate: f64, rng_seed: u64) -> Vec<u32> {
    assert!((0.0..1.0).contains(&rate), "rate must be in [0, 1)");
    let mut rng = SplitMix64::new(rng_seed);
    let picked = pick_positions(tokens.len(), attacked_count(tokens.len(), rate), &mut rng);
    let mut drop = vec![false; tokens.len()];
    for pos in picked {
        drop[pos] = true;
    }
    tokens
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(&t, _)| t)
        .collect()
}

/// Remote paraphraser address plus transport knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseEndpoint {
    pub url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_timeout_ms() -> u64 {
    5000
}

fn default_retries() -> u32 {
    2
}

#[derive(Serialize, Deserialize)]
struct WireTokens {
    text_tokens: Vec<u32>,
}

/// Send the sequence to the paraphrase endpoint and return its rewrite.
/// Wire format both ways: JSON {"text_tokens": [int, ...]}. Retries are
/// idempotent; after they are exhausted every failure mode (connect, HTTP
/// status, malformed body) becomes [`Error::AttackUnavailable`].
pub fn paraphrase(tokens: &[u32], endpoint: &ParaphraseEndpoint) -> Result<Vec<u32>, Error> {
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_millis(endpoint.timeout_ms))
        .build();
    let body = serde_json::to_string(&WireTokens {
        text_tokens: tokens.to_vec(),
    })
    .expect("token list serializes");
    let mut last_failure = String::new();
    for _ in 0..=endpoint.retries {
        match agent
            .post(&endpoint.url)
            .set("content-type", "application/json")
            .send_string(&body)
        {
            Ok(resp) => match resp.into_string() {
                Ok(text) => match serde_json::from_str::<WireTokens>(&text) {
                    Ok(wire) => return Ok(wire.text_tokens),
                    Err(e) => last_failure = format!("malformed response body: {e}"),
                },
                Err(e) => last_failure = format!("failed reading response: {e}"),
            },
            Err(e) => last_failure = e.to_string(),
        }
    }
    Err(Error::AttackUnavailable {
        reason: last_failure,
    })
}
