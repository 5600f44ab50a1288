//! Keyed green/red split of the vocabulary, one per generation position.
//!
//! The split is a pure function of (key, previous token, vocab size, gamma):
//! a seed is derived from key and previous token, the vocabulary is shuffled
//! with Fisher-Yates driven by that seed, and the first floor(gamma * vocab)
//! entries of the permutation form the green list. Generator and detector
//! run the identical construction, which is what makes detection possible.

use serde::{Deserialize, Serialize};

use crate::rng::{SplitMix64, GOLDEN_GAMMA};

/// Green/red split at one position.
#[derive(Clone, Debug, PartialEq)]
pub struct GreenRedPartition {
    pub vocab_size: usize,
    pub gamma: f64,
    /// green_mask[t] is true iff token t is green.
    pub green_mask: Vec<bool>,
}

impl GreenRedPartition {
    #[inline]
    pub fn is_green(&self, token: u32) -> bool {
        self.green_mask[token as usize]
    }

    pub fn green_count(&self) -> usize {
        self.green_mask.iter().filter(|&&g| g).count()
    }
}

/// Per-position seed: fold the previous token into the key, then take one
/// SplitMix64 output.
pub fn derive_seed(key: u64, prev_token: u32) -> u64 {
    SplitMix64::new(key ^ (prev_token as u64).wrapping_mul(GOLDEN_GAMMA)).next_u64()
}

/// Fisher-Yates permutation of [0, vocab_size) driven by the seeded stream.
/// Exposed so golden vectors can record the green list in permutation order.
pub fn permutation(seed: u64, vocab_size: usize) -> Vec<u32> {
    let mut perm: Vec<u32> = (0..vocab_size as u32).collect();
    let mut rng = SplitMix64::new(seed);
    for i in (1..vocab_size).rev() {
        let j = rng.range(i as u64 + 1) as usize;
        perm.swap(i, j);
    }
    perm
}

/// Build the partition for one position.
///
/// # Panics
/// If `vocab_size < 2` or `gamma` is outside (0, 1).
pub fn partition(seed: u64, vocab_size: usize, gamma: f64) -> GreenRedPartition {
    assert!(vocab_size >= 2, "vocab_size must be at least 2");
    assert!(
        gamma > 0.0 && gamma < 1.0,
        "gamma must be in (0, 1), got {gamma}"
    );
    let perm = permutation(seed, vocab_size);
    let green_count = (gamma * vocab_size as f64).floor() as usize;
    let mut green_mask = vec![false; vocab_size];
    for &t in &perm[..green_count] {
        green_mask[t as usize] = true;
    }
    GreenRedPartition {
        vocab_size,
        gamma,
        green_mask,
    }
}

/// One frozen partition case for cross-implementation bit-exactness checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenVector {
    pub key: u64,
    pub prev_token: u32,
    pub vocab_size: usize,
    pub gamma: f64,
    pub green_count: usize,
    /// First 16 green tokens in permutation order (fewer if the green list
    /// is shorter).
    pub green_indices_first_16: Vec<u32>,
}

/// Evaluate the partition pipeline for one golden case.
pub fn golden_vector(key: u64, prev_token: u32, vocab_size: usize, gamma: f64) -> GoldenVector {
    let seed = derive_seed(key, prev_token);
    let perm = permutation(seed, vocab_size);
    let green_count = (gamma * vocab_size as f64).floor() as usize;
    let head = green_count.min(16);
    GoldenVector {
        key,
        prev_token,
        vocab_size,
        gamma,
        green_count,
        green_indices_first_16: perm[..head].to_vec(),
    }
}
