//! Strength policies: map the green-list probability mass to a reweighting
//! strength r in [eps, 1-eps].
//!
//! All policies gate on a threshold p0: at or below it the step is left
//! effectively unwatermarked (r = eps). Above it, r follows a growth curve in
//! pg, clamped into [eps, 1-eps]. The growth curves are monotone increasing,
//! so low-confidence (low green mass) steps get a weak push and
//! high-confidence steps a strong one.

use serde::{Deserialize, Serialize};

pub const K_LINEAR_DEFAULT: f64 = 1.55;
pub const K_EXP_DEFAULT: f64 = 1.30;
pub const K_LOG_DEFAULT: f64 = 2.15;
pub const P0_DEFAULT: f64 = 0.15;
pub const EPS_DEFAULT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Linear,
    Exp,
    Log,
    /// Constant r regardless of pg; baseline plumbing, not a growth curve.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrengthPolicy {
    pub kind: PolicyKind,
    /// Growth rate; unused for `Fixed`.
    pub k: f64,
    /// Watermarking threshold: pg <= p0 yields r = eps.
    pub p0: f64,
    pub eps: f64,
    /// Only meaningful for `Fixed`.
    pub fixed_r: f64,
}

impl StrengthPolicy {
    pub fn linear() -> Self {
        StrengthPolicy {
            kind: PolicyKind::Linear,
            k: K_LINEAR_DEFAULT,
            p0: P0_DEFAULT,
            eps: EPS_DEFAULT,
            fixed_r: 0.0,
        }
    }

    pub fn exp() -> Self {
        StrengthPolicy {
            kind: PolicyKind::Exp,
            k: K_EXP_DEFAULT,
            ..Self::linear()
        }
    }

    pub fn log() -> Self {
        StrengthPolicy {
            kind: PolicyKind::Log,
            k: K_LOG_DEFAULT,
            ..Self::linear()
        }
    }

    /// Constant-strength policy. `r` must lie in (0, 1).
    pub fn fixed(r: f64) -> Self {
        assert!(r > 0.0 && r < 1.0, "fixed r must be in (0, 1), got {r}");
        StrengthPolicy {
            kind: PolicyKind::Fixed,
            fixed_r: r,
            ..Self::linear()
        }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        assert!(k > 0.0, "k must be positive, got {k}");
        self.k = k;
        self
    }

    pub fn with_p0(mut self, p0: f64) -> Self {
        assert!((0.0..1.0).contains(&p0), "p0 must be in [0, 1), got {p0}");
        self.p0 = p0;
        self
    }
}

/// Evaluate the policy at green mass `pg`.
///
/// # Panics
/// If `pg` is outside [0, 1].
pub fn strength(policy: &StrengthPolicy, pg: f64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&pg),
        "pg must be in [0, 1], got {pg}"
    );
    let lo = policy.eps;
    let hi = 1.0 - policy.eps;
    if policy.kind == PolicyKind::Fixed {
        return policy.fixed_r.clamp(lo, hi);
    }
    if pg <= policy.p0 {
        return lo;
    }
    let raw = match policy.kind {
        PolicyKind::Linear => policy.k * pg,
        PolicyKind::Exp => (policy.k * pg).exp() - 1.0,
        PolicyKind::Log => (policy.k * pg + 1.0).ln(),
        PolicyKind::Fixed => unreachable!(),
    };
    raw.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_operating_point() {
        let p = StrengthPolicy::exp();
        assert_eq!(p.k, 1.30);
        assert_eq!(p.p0, 0.15);
        assert_eq!(p.eps, 1e-10);
        assert_eq!(StrengthPolicy::linear().k, 1.55);
        assert_eq!(StrengthPolicy::log().k, 2.15);
    }

    #[test]
    fn threshold_branch_returns_eps() {
        let p = StrengthPolicy::linear();
        assert_eq!(strength(&p, 0.10), 1e-10);
        // Boundary is inclusive.
        assert_eq!(strength(&p, 0.15), 1e-10);
        assert!(strength(&p, 0.1500001) > 1e-10);
    }

    #[test]
    fn growth_curves_frozen_values() {
        let lin = StrengthPolicy::linear();
        assert!((strength(&lin, 0.5) - 0.775).abs() < 1e-15);

        let exp = StrengthPolicy::exp();
        // e^0.65 - 1, from an independent high-precision evaluation.
        assert!((strength(&exp, 0.5) - 0.9155408290138962).abs() < 1e-15);

        let log = StrengthPolicy::log();
        // ln(2.15 * 0.5 + 1)
        assert!((strength(&log, 0.5) - 0.7299611536826617).abs() < 1e-15);
    }

    #[test]
    fn clamps_at_one_minus_eps() {
        let lin = StrengthPolicy::linear();
        assert_eq!(strength(&lin, 0.9), 1.0 - 1e-10); // 1.395 pre-clamp
        let exp = StrengthPolicy::exp();
        assert_eq!(strength(&exp, 0.95), 1.0 - 1e-10); // e^1.235 - 1 pre-clamp
    }

    #[test]
    fn fixed_ignores_pg() {
        let p = StrengthPolicy::fixed(0.37);
        assert_eq!(strength(&p, 0.0), 0.37);
        assert_eq!(strength(&p, 0.05), 0.37);
        assert_eq!(strength(&p, 0.99), 0.37);
    }

    #[test]
    fn monotone_in_pg() {
        for policy in [
            StrengthPolicy::linear(),
            StrengthPolicy::exp(),
            StrengthPolicy::log(),
        ] {
            let mut last = 0.0;
            for i in 0..=100 {
                let r = strength(&policy, i as f64 / 100.0);
                assert!(r >= last, "{policy:?} decreased at pg={}", i as f64 / 100.0);
                assert!((1e-10..=1.0 - 1e-10).contains(&r));
                last = r;
            }
        }
    }

    #[test]
    #[should_panic(expected = "pg")]
    fn rejects_out_of_range_pg() {
        strength(&StrengthPolicy::exp(), 1.5);
    }
}
