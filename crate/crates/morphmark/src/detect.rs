//! Watermark detection: green-count z-test over a token sequence, plus the
//! ROC metrics used to evaluate detectors.
//!
//! Scoring recomputes the partition at every position from the preceding
//! token, exactly as generation did, and counts green hits. Under the null
//! (no watermark, or wrong key) each scored position is green with
//! probability gamma independently, so the normalized count is
//! asymptotically standard normal.

use serde::{Deserialize, Serialize};

use crate::partition::{derive_seed, partition};
use crate::Error;

/// One-sided 1% Gaussian tail; the default decision threshold when the
/// caller supplies none.
pub const DEFAULT_Z_THRESHOLD: f64 = 2.326;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Number of scored positions (sequence length minus one).
    pub total_scored: usize,
    pub green_count: usize,
    pub z: f64,
    pub threshold: f64,
    pub is_watermarked: bool,
    /// Color of each scored position, in order (index 0 is sequence
    /// position 1).
    pub per_position_colors: Vec<bool>,
}

impl DetectionReport {
    /// Same report re-decided at a different threshold.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.is_watermarked = self.z > threshold;
        self
    }
}

/// z-score for `green_count` greens among `total_scored` positions under the
/// binomial(gamma) null.
pub fn z_score(green_count: usize, total_scored: usize, gamma: f64) -> f64 {
    let t = total_scored as f64;
    (green_count as f64 - gamma * t) / (t * gamma * (1.0 - gamma)).sqrt()
}

/// Score a bare token sequence. Position 0 has no in-sequence predecessor
/// and is excluded; every later position is colored by the partition derived
/// from its predecessor. The report is decided at [`DEFAULT_Z_THRESHOLD`];
/// use [`DetectionReport::with_threshold`] or [`decide`] for other
/// thresholds.
pub fn score_sequence(
    tokens: &[u32],
    key: u64,
    gamma: f64,
    vocab_size: usize,
) -> Result<DetectionReport, Error> {
    if tokens.len() < 2 {
        return Err(Error::SequenceTooShort { len: tokens.len() });
    }
    for &t in tokens {
        if (t as usize) >= vocab_size {
            return Err(Error::TokenOutOfRange {
                token: t,
                vocab_size,
            });
        }
    }
    let mut colors = Vec::with_capacity(tokens.len() - 1);
    for w in tokens.windows(2) {
        let part = partition(derive_seed(key, w[0]), vocab_size, gamma);
        colors.push(part.is_green(w[1]));
    }
    let green_count = colors.iter().filter(|&&g| g).count();
    let total_scored = colors.len();
    let z = z_score(green_count, total_scored, gamma);
    Ok(DetectionReport {
        total_scored,
        green_count,
        z,
        threshold: DEFAULT_Z_THRESHOLD,
        is_watermarked: z > DEFAULT_Z_THRESHOLD,
        per_position_colors: colors,
    })
}

/// True iff the report's z exceeds the threshold.
pub fn decide(report: &DetectionReport, z_threshold: f64) -> bool {
    report.z > z_threshold
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocMetrics {
    /// (FPR level, TPR at that level), in the order the levels were given.
    pub tpr_at_fpr: Vec<(f64, f64)>,
    pub best_f1: f64,
    pub auroc: f64,
}

/// Threshold realizing at most `fpr` false positives on `clean_sorted`
/// (ascending): the (1-fpr) empirical quantile. Positives are scores
/// strictly greater.
fn fpr_threshold(clean_sorted: &[f64], fpr: f64) -> f64 {
    let n = clean_sorted.len();
    let idx = ((1.0 - fpr) * n as f64).ceil() as usize;
    clean_sorted[idx.saturating_sub(1).min(n - 1)]
}

/// Evaluate detector scores: TPR at the requested empirical FPR levels, best
/// F1 over thresholds induced by the observed scores, and rank-statistic
/// AUROC with tie-averaged ranks.
///
/// # Panics
/// If either score list is empty.
pub fn roc_metrics(watermarked_z: &[f64], clean_z: &[f64], fpr_levels: &[f64]) -> RocMetrics {
    assert!(
        !watermarked_z.is_empty() && !clean_z.is_empty(),
        "score lists must be non-empty"
    );
    let mut clean_sorted = clean_z.to_vec();
    clean_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let tpr_at_fpr = fpr_levels
        .iter()
        .map(|&level| {
            let thr = fpr_threshold(&clean_sorted, level);
            let tpr = watermarked_z.iter().filter(|&&z| z > thr).count() as f64
                / watermarked_z.len() as f64;
            (level, tpr)
        })
        .collect();

    let mut thresholds: Vec<f64> = watermarked_z.iter().chain(clean_z).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    let mut best_f1 = 0.0f64;
    for &t in &thresholds {
        let tp = watermarked_z.iter().filter(|&&z| z > t).count() as f64;
        let fp = clean_z.iter().filter(|&&z| z > t).count() as f64;
        let missed = watermarked_z.len() as f64 - tp;
        let denom = 2.0 * tp + fp + missed;
        if denom > 0.0 {
            best_f1 = best_f1.max(2.0 * tp / denom);
        }
    }

    // Mann-Whitney U from tie-averaged ranks.
    let mut all: Vec<(f64, bool)> = watermarked_z
        .iter()
        .map(|&z| (z, true))
        .chain(clean_z.iter().map(|&z| (z, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut rank_sum_wm = 0.0f64;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // 1-based ranks i+1 ..= j averaged over the tied block.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                rank_sum_wm += avg_rank;
            }
        }
        i = j;
    }
    let nw = watermarked_z.len() as f64;
    let nc = clean_z.len() as f64;
    let auroc = (rank_sum_wm - nw * (nw + 1.0) / 2.0) / (nw * nc);

    RocMetrics {
        tpr_at_fpr,
        best_f1,
        auroc,
    }
}
