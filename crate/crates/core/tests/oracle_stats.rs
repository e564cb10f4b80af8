//! The statistics kit against independently re-derived oracles: brute-force
//! percentiles and target statistics under randomized multisets, and
//! Spearman against the closed form over a full permutation group and a
//! counting-based tie oracle.

mod common;

use common::{oracle_percentile, oracle_round, oracle_select, oracle_sorted};
use lapo_core::stats::{compute_range, percentile, select_target, spearman, TargetStatistic};
use lapo_core::types::CorrectLengthSample;
use proptest::prelude::*;

fn sample(v: &[u32]) -> CorrectLengthSample {
    CorrectLengthSample::new(v.to_vec())
}

fn lengths() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(1u32..=5000, 1..=100)
}

/// Percent values with extra weight on the ones the pipeline actually uses.
fn percent() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        Just(30.0),
        Just(50.0),
        Just(70.0),
        Just(100.0),
        0.0f64..=100.0,
    ]
}

proptest! {
    #[test]
    fn percentile_matches_brute_force(xs in lengths(), p in percent()) {
        let got = percentile(&sample(&xs), p).unwrap();
        let want = oracle_percentile(&xs, p);
        // same contract expression on the same order statistics -> same bits
        prop_assert_eq!(got.to_bits(), want.to_bits(), "{} vs {}", got, want);
    }

    #[test]
    fn percentile_stays_inside_the_sample_hull(xs in lengths(), p in percent()) {
        let got = percentile(&sample(&xs), p).unwrap();
        let sorted = oracle_sorted(&xs);
        prop_assert!(got >= sorted[0]);
        prop_assert!(got <= sorted[sorted.len() - 1]);
    }

    #[test]
    fn percentile_is_monotone_in_p(xs in lengths(), p1 in percent(), p2 in percent()) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let a = percentile(&sample(&xs), lo).unwrap();
        let b = percentile(&sample(&xs), hi).unwrap();
        prop_assert!(a <= b, "P{} = {} > P{} = {}", lo, a, hi, b);
    }

    #[test]
    fn percentile_ignores_input_order(xs in lengths(), rot in 0usize..100, p in percent()) {
        let mut rotated = xs.clone();
        let k = rot % xs.len();
        rotated.rotate_left(k);
        let a = percentile(&sample(&xs), p).unwrap();
        let b = percentile(&sample(&rotated), p).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn range_matches_brute_force(xs in lengths()) {
        let r = compute_range(&sample(&xs)).unwrap();
        prop_assert_eq!(r.lo, oracle_round(oracle_percentile(&xs, 30.0)));
        prop_assert_eq!(r.hi, oracle_round(oracle_percentile(&xs, 70.0)));
        prop_assert!(r.lo <= r.hi);
    }

    #[test]
    fn select_target_matches_brute_force(xs in lengths()) {
        for stat in [TargetStatistic::Median, TargetStatistic::Mean, TargetStatistic::Minimum] {
            prop_assert_eq!(select_target(&sample(&xs), stat).unwrap(), oracle_select(&xs, stat));
        }
    }

    #[test]
    fn spearman_with_ties_matches_counting_oracle(
        pairs in prop::collection::vec((0u32..10, 0u32..10), 2..=40)
    ) {
        let xs: Vec<f64> = pairs.iter().map(|&(a, _)| f64::from(a)).collect();
        let ys: Vec<f64> = pairs.iter().map(|&(_, b)| f64::from(b)).collect();
        prop_assume!(xs.iter().any(|&v| v != xs[0]));
        prop_assume!(ys.iter().any(|&v| v != ys[0]));
        let got = spearman(&xs, &ys).unwrap();
        let want = counting_spearman(&xs, &ys);
        prop_assert!((got - want).abs() < 1e-9, "{} vs {}", got, want);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&got));
    }
}

/// Average 1-based ranks by counting, not sorting: rank(v) = #below(v) +
/// (#equal(v) + 1) / 2.
fn counting_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&v| {
            let less = xs.iter().filter(|&&y| y < v).count() as f64;
            let equal = xs.iter().filter(|&&y| y == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Pearson on counting ranks via the moment form E[XY] - E[X]E[Y].
fn counting_spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rx = counting_ranks(xs);
    let ry = counting_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let sxy = rx.iter().zip(&ry).map(|(a, b)| a * b).sum::<f64>() / n - mx * my;
    let sxx = rx.iter().map(|a| a * a).sum::<f64>() / n - mx * mx;
    let syy = ry.iter().map(|b| b * b).sum::<f64>() / n - my * my;
    sxy / (sxx * syy).sqrt()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let n = used.len();
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// With distinct values, Spearman has the textbook closed form
/// rho = 1 - 6 * sum(d^2) / (n(n^2 - 1)). Check it on all 120 permutations
/// of five.
#[test]
fn spearman_matches_closed_form_on_every_permutation_of_five() {
    let ys: Vec<f64> = (1..=5).map(f64::from).collect();
    let perms = permutations(5);
    assert_eq!(perms.len(), 120);
    for perm in perms {
        let xs: Vec<f64> = perm.iter().map(|&i| (i + 1) as f64).collect();
        let got = spearman(&xs, &ys).unwrap();
        let d2: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - b) * (a - b)).sum();
        let want = 1.0 - 6.0 * d2 / (5.0 * 24.0);
        assert!((got - want).abs() < 1e-12, "perm {:?}: {} vs {}", perm, got, want);
    }
}

/// Multisets engineered to land the interpolation near half-token
/// boundaries: arithmetic progressions of 18 values give h = 5.1 and 11.9,
/// so frac * gap brushes .5 for odd gaps. The library and the brute-force
/// oracle must agree to the bit even there.
#[test]
fn half_token_brackets_agree_with_the_oracle() {
    for gap in [1u32, 3, 5, 7, 10, 25] {
        for base in [50u32, 100, 999] {
            let mut xs: Vec<u32> = (0..18).map(|i| base + i * gap).collect();
            xs.reverse(); // exercise the sort too
            let r = compute_range(&sample(&xs)).unwrap();
            assert_eq!(r.lo, oracle_round(oracle_percentile(&xs, 30.0)), "gap {gap} base {base}");
            assert_eq!(r.hi, oracle_round(oracle_percentile(&xs, 70.0)), "gap {gap} base {base}");
        }
    }
}
