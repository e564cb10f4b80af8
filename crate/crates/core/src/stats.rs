//! Small statistics kit: percentiles with linear interpolation, the
//! Discovery reward range, target-statistic selection, and Spearman rank
//! correlation. Everything operates on plain slices so callers can feed it
//! lengths, rewards, or ranks alike.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{CorrectLengthSample, LengthRange};

/// Which statistic of the correct-length sample becomes the map target.
/// Median is the default; Mean and Minimum are ablation arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetStatistic {
    Median,
    Mean,
    Minimum,
}

impl Default for TargetStatistic {
    fn default() -> Self {
        TargetStatistic::Median
    }
}

/// Mean of a sample. Returns 0.0 for an empty slice (callers guard).
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divide by n, not n-1) — the GRPO
/// normalizer.
pub fn std_pop(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Percentile by linear interpolation between order statistics:
/// h = (n-1) * p/100, result = x[floor(h)] + frac(h) * (x[ceil(h)] - x[floor(h)]).
///
/// Errors on an empty sample or p outside [0, 100].
pub fn percentile(sample: &CorrectLengthSample, p: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::config(format!("percentile p {p} outside [0, 100]")));
    }
    let mut xs: Vec<f64> = sample.as_slice().iter().map(|&v| f64::from(v)).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("lengths are finite"));
    let n = xs.len();
    let h = (n - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    Ok(xs[lo] + frac * (xs[hi] - xs[lo]))
}

/// Round to the nearest whole token, ties away from zero (f64::round's rule).
fn round_tokens(x: f64) -> u32 {
    let r = x.round();
    if r < 0.0 {
        0
    } else {
        r as u32
    }
}

/// The Discovery reasonable-length band: [P30, P70] of the correct lengths,
/// rounded to whole tokens. Errors on an empty sample.
pub fn compute_range(sample: &CorrectLengthSample) -> Result<LengthRange> {
    let lo = round_tokens(percentile(sample, 30.0)?);
    let hi = round_tokens(percentile(sample, 70.0)?);
    LengthRange::new(lo, hi)
}

/// The map-target statistic of a correct-length sample, rounded to whole
/// tokens. Errors on an empty sample (the caller resets the entry instead).
pub fn select_target(sample: &CorrectLengthSample, statistic: TargetStatistic) -> Result<u32> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let value = match statistic {
        TargetStatistic::Median => percentile(sample, 50.0)?,
        TargetStatistic::Mean => {
            let xs: Vec<f64> = sample.as_slice().iter().map(|&v| f64::from(v)).collect();
            mean(&xs)
        }
        TargetStatistic::Minimum => {
            f64::from(*sample.as_slice().iter().min().expect("non-empty"))
        }
    };
    Ok(round_tokens(value))
}

/// Ranks with ties averaged (1-based), the convention Spearman needs.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // positions i..=j share a tie; average their 1-based ranks
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties (computed as the
/// Pearson correlation of the rank vectors, which stays correct under ties).
///
/// Errors on mismatched lengths, fewer than two points, or constant input.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::config(format!(
            "spearman inputs differ in length: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::config("spearman needs at least two points"));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let mx = mean(&rx);
    let my = mean(&ry);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..rx.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::config("spearman undefined for constant input"));
    }
    Ok(cov / (vx * vy).sqrt())
}
