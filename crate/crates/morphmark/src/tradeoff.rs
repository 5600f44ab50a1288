//! Quality/strength trade-off analysis behind the adaptive rule.
//!
//! For a step with green mass pg reweighted at strength r, quality is the
//! similarity of the reweighted distribution to the original (Bhattacharyya
//! coefficient, or negative KL divergence) and effectiveness is the gain in
//! the green-minus-red probability gap, 2r(1-pg). The weighted objective
//! F(r) = T(r) + omega * W(r) has a unique interior maximizer r*, located by
//! bisection on a sign-equivalent surrogate S of dF/dr. r* grows with pg,
//! which is exactly the shape the strength policies imitate.
//!
//! Both quality variants have closed forms in (pg, r) because reweighting
//! scales each list uniformly; the closed forms are checked against
//! sum-over-vocabulary oracles in the tests.

use serde::{Deserialize, Serialize};

/// S is evaluated away from the r=1 pole where it diverges.
const R_LO: f64 = 1e-9;
const R_HI: f64 = 1.0 - 1e-9;

const MAX_BISECTION_ITERS: u32 = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityMetric {
    /// Bhattacharyya coefficient; the default.
    Bc,
    /// Negative KL divergence from the original distribution.
    Kl,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TradeoffQuery {
    pub pg: f64,
    pub r: f64,
    pub omega: f64,
    pub quality_metric: QualityMetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub t_value: f64,
    pub w_value: f64,
    pub f_value: f64,
    pub s_value: f64,
}

fn assert_interior(name: &str, v: f64) {
    assert!(v > 0.0 && v < 1.0, "{name} must be in (0, 1), got {v}");
}

/// Bhattacharyya coefficient between a distribution with green mass `pg` and
/// its reweighted form at strength `r`:
/// pg * sqrt(1 + r(1-pg)/pg) + (1-pg) * sqrt(1-r).
pub fn quality_bc(pg: f64, r: f64) -> f64 {
    assert_interior("pg", pg);
    assert_interior("r", r);
    pg * (1.0 + r * (1.0 - pg) / pg).sqrt() + (1.0 - pg) * (1.0 - r).sqrt()
}

/// Negative KL divergence (original as reference) in closed form:
/// pg * ln(1 + r(1-pg)/pg) + (1-pg) * ln(1-r). Always <= 0.
pub fn quality_kl(pg: f64, r: f64) -> f64 {
    assert_interior("pg", pg);
    assert_interior("r", r);
    pg * (1.0 + r * (1.0 - pg) / pg).ln() + (1.0 - pg) * (1.0 - r).ln()
}

/// Gain in the green-minus-red probability gap: 2r(1-pg).
pub fn effectiveness(pg: f64, r: f64) -> f64 {
    assert_interior("pg", pg);
    assert_interior("r", r);
    2.0 * r * (1.0 - pg)
}

/// Sign-equivalent surrogate of dF/dr: dF/dr = (1-pg) * S(r), so the root of
/// S is the maximizer of F. Strictly decreasing in r, with limit 2*omega as
/// r -> 0 and -infinity as r -> 1.
pub fn surrogate_s(pg: f64, r: f64, omega: f64, metric: QualityMetric) -> f64 {
    assert_interior("pg", pg);
    assert_interior("r", r);
    assert!(omega > 0.0, "omega must be positive, got {omega}");
    let growth = 1.0 + r * (1.0 - pg) / pg;
    match metric {
        QualityMetric::Bc => 2.0 * omega + 0.5 / growth.sqrt() - 0.5 / (1.0 - r).sqrt(),
        QualityMetric::Kl => 2.0 * omega + 1.0 / growth - 1.0 / (1.0 - r),
    }
}

/// Evaluate quality, effectiveness, the combined objective, and the
/// surrogate at one (pg, r, omega) point.
pub fn objective(query: &TradeoffQuery) -> TradeoffPoint {
    assert!(query.omega > 0.0, "omega must be positive");
    let t_value = match query.quality_metric {
        QualityMetric::Bc => quality_bc(query.pg, query.r),
        QualityMetric::Kl => quality_kl(query.pg, query.r),
    };
    let w_value = effectiveness(query.pg, query.r);
    TradeoffPoint {
        t_value,
        w_value,
        f_value: t_value + query.omega * w_value,
        s_value: surrogate_s(query.pg, query.r, query.omega, query.quality_metric),
    }
}

/// Maximizer of F for fixed (pg, omega): bisection on S over
/// [1e-9, 1 - 1e-9], exploiting that S is strictly decreasing. `tol` bounds
/// the residual |S| at the returned point; at most 200 iterations.
pub fn optimal_r(pg: f64, omega: f64, quality_metric: QualityMetric, tol: f64) -> f64 {
    assert_interior("pg", pg);
    assert!(omega > 0.0 && tol > 0.0, "omega and tol must be positive");
    let mut lo = R_LO;
    let mut hi = R_HI;
    // S(lo) ~ 2*omega > 0; S(hi) is dominated by the -1/(1-r) pole.
    if surrogate_s(pg, hi, omega, quality_metric) >= 0.0 {
        return hi;
    }
    // tol bounds the residual |S(r*)|, not the bracket width: near r = 1 the
    // bc surrogate is steep enough that a 1e-12 bracket still leaves S above
    // 1e-10. Iterate until S itself is inside tol or the bracket collapses.
    let mut best = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        best = mid;
        let s = surrogate_s(pg, mid, omega, quality_metric);
        if s.abs() <= tol {
            break;
        }
        if s > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub strictly_increasing: bool,
    /// (pg, r*) along the input grid.
    pub curve: Vec<(f64, f64)>,
}

/// Sweep r* along a pg grid and check it is strictly increasing.
///
/// # Panics
/// If the grid is empty, not strictly increasing, or not interior.
pub fn verify_monotonicity(
    omega: f64,
    pg_grid: &[f64],
    quality_metric: QualityMetric,
) -> MonotonicityReport {
    assert!(!pg_grid.is_empty(), "pg_grid must be non-empty");
    assert!(
        pg_grid.windows(2).all(|w| w[0] < w[1]),
        "pg_grid must be strictly increasing"
    );
    let curve: Vec<(f64, f64)> = pg_grid
        .iter()
        .map(|&pg| (pg, optimal_r(pg, omega, quality_metric, 1e-12)))
        .collect();
    let strictly_increasing = curve.windows(2).all(|w| w[0].1 < w[1].1);
    MonotonicityReport {
        strictly_increasing,
        curve,
    }
}
