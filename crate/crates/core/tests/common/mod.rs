//! Hand-rolled reference implementations shared by the oracle test suites.
//!
//! The percentile oracle re-derives sorting (insertion sort), bracket
//! selection and tie rounding from scratch, but evaluates the final
//! interpolation with the same two-term expression the library documents:
//! that expression *is* the contract, and its f64 rounding is what
//! legitimately decides half-token ties, so an extended-precision
//! re-derivation would flag correct tie behavior as a failure on knife-edge
//! multisets.

#![allow(dead_code)]

use lapo_core::stats::TargetStatistic;

/// Round to nearest whole token, ties away from zero, negatives clamped to
/// zero — restated with trunc/frac instead of f64::round so the tie rule is
/// asserted rather than inherited.
pub fn oracle_round(x: f64) -> u32 {
    if x <= 0.0 {
        return 0;
    }
    let t = x.trunc();
    let frac = x - t; // exact: t and x share an exponent scale
    let r = if frac >= 0.5 { t + 1.0 } else { t };
    r as u32
}

/// Insertion sort into a fresh buffer — independent of slice::sort.
pub fn oracle_sorted(xs: &[u32]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(xs.len());
    for &x in xs {
        let v = f64::from(x);
        let pos = out.iter().position(|&y| y > v).unwrap_or(out.len());
        out.insert(pos, v);
    }
    out
}

/// The contract interpolation h = (n-1)p/100, x_lo + frac * (x_hi - x_lo),
/// evaluated on the oracle's own sort and brackets.
pub fn oracle_percentile(xs: &[u32], p: f64) -> f64 {
    let sorted = oracle_sorted(xs);
    let n = sorted.len();
    assert!(n > 0 && (0.0..=100.0).contains(&p));
    let h = (n - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Target statistic of a non-empty sample, rounded. The mean goes through
/// an exact u64 sum; for the small integer lengths the tests use, the f64
/// sum the library takes is exact too, so the two must agree to the bit.
pub fn oracle_select(xs: &[u32], stat: TargetStatistic) -> u32 {
    assert!(!xs.is_empty());
    let value = match stat {
        TargetStatistic::Median => oracle_percentile(xs, 50.0),
        TargetStatistic::Mean => {
            xs.iter().map(|&x| u64::from(x)).sum::<u64>() as f64 / xs.len() as f64
        }
        TargetStatistic::Minimum => f64::from(*xs.iter().min().expect("non-empty")),
    };
    oracle_round(value)
}
