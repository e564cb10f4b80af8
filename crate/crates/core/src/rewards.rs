//! Reward functions for both stages plus the guidance-variant arms.
//!
//! Discovery (Eqs. 4-5): correct responses earn 1 plus alpha times a plateau
//! reward that is 1.0 inside the group's [P30, P70] band and decays linearly
//! with distance outside it. Internalization (Eqs. 7-8): correct responses
//! earn 1 plus beta times a Gaussian in the miss distance from the declared
//! budget. Everything is gated on correctness: incorrect => total 0 exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{LengthRange, RewardBreakdown, Rollout, RewardConfig, SigmaMode};

/// How the budget prompt conditions Internalization (the prompt-ablation
/// arms): the exact target, a band around it, or nothing at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceMode {
    Exact,
    Range,
    Implicit,
}

impl Default for GuidanceMode {
    fn default() -> Self {
        GuidanceMode::Exact
    }
}

/// Resolve the adherence tolerance for a target of n tokens.
/// Proportional mode: sigma = max(1, round(ratio * n)).
pub fn sigma_for_target(n: u32, mode: SigmaMode) -> f64 {
    match mode {
        SigmaMode::ProportionalToTarget { ratio } => (ratio * f64::from(n)).round().max(1.0),
        SigmaMode::Fixed { tokens } => f64::from(tokens),
    }
}

/// Eq. 5: 1.0 inside the band, linear falloff max(0, 1 - d/scale) outside,
/// always 0 for incorrect responses.
pub fn discovery_length_reward(
    length: u32,
    correct: bool,
    range: LengthRange,
    distance_scale: f64,
) -> f64 {
    if !correct {
        return 0.0;
    }
    if range.contains(length) {
        return 1.0;
    }
    let l = f64::from(length);
    let d = (l - f64::from(range.lo))
        .abs()
        .min((l - f64::from(range.hi)).abs());
    (1.0 - d / distance_scale).max(0.0)
}

/// Eq. 4: total = I(correct) + alpha * length reward.
pub fn discovery_total_reward(
    rollout: &Rollout,
    range: LengthRange,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let correctness = if rollout.correct { 1.0 } else { 0.0 };
    let length_term =
        discovery_length_reward(rollout.length, rollout.correct, range, cfg.distance_scale);
    RewardBreakdown {
        correctness_term: correctness,
        length_term,
        total: correctness + cfg.alpha * length_term,
    }
}

/// Eq. 8: Gaussian in the miss distance, gated on correctness.
pub fn adherence_reward(length: u32, correct: bool, n: u32, sigma: f64) -> Result<f64> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::config(format!("adherence sigma {sigma} must be positive")));
    }
    if !correct {
        return Ok(0.0);
    }
    let d = f64::from(length) - f64::from(n);
    Ok((-d * d / (2.0 * sigma * sigma)).exp())
}

/// Eq. 7: total = I(correct) + beta * adherence. The budget comes from the
/// rollout itself (it was stamped at sampling time), so a missing budget is
/// a hard error, not a silent zero.
pub fn internalization_total_reward(
    rollout: &Rollout,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown> {
    let n = rollout.declared_budget.ok_or(Error::BudgetMissing)?;
    let sigma = sigma_for_target(n, cfg.sigma_mode);
    let correctness = if rollout.correct { 1.0 } else { 0.0 };
    let length_term = adherence_reward(rollout.length, rollout.correct, n, sigma)?;
    Ok(RewardBreakdown {
        correctness_term: correctness,
        length_term,
        total: correctness + cfg.beta * length_term,
    })
}

/// The band shown to the policy in Range guidance: +/-10% around the target,
/// rounded to whole tokens. The 10% width mirrors the default adherence
/// tolerance (sigma = 0.1 n), so Range and Exact reward comparable misses.
pub fn guidance_range_for(n: u32) -> LengthRange {
    let lo = (0.9 * f64::from(n)).round().max(1.0) as u32;
    let hi = (1.1 * f64::from(n)).round() as u32;
    LengthRange { lo: lo.min(hi), hi }
}

/// Reward for one rollout under a guidance-ablation arm.
///
/// Exact defers to Eq. 7-8. Range pays beta * 1.0 anywhere inside the band
/// and a Gaussian falloff from the nearest bound outside it (sigma resolved
/// against n when given, else against the violated bound). Implicit has no
/// budget at all and falls back to Discovery semantics against the group's
/// own range.
pub fn guidance_variant_reward(
    rollout: &Rollout,
    mode: GuidanceMode,
    n: Option<u32>,
    range: Option<LengthRange>,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown> {
    match mode {
        GuidanceMode::Exact => internalization_total_reward(rollout, cfg),
        GuidanceMode::Range => {
            let range = range
                .ok_or_else(|| Error::config("Range guidance requires a target range"))?;
            let correctness = if rollout.correct { 1.0 } else { 0.0 };
            let length_term = if !rollout.correct {
                0.0
            } else if range.contains(rollout.length) {
                1.0
            } else {
                let bound = if rollout.length < range.lo { range.lo } else { range.hi };
                let sigma = sigma_for_target(n.unwrap_or(bound), cfg.sigma_mode);
                adherence_reward(rollout.length, true, bound, sigma)?
            };
            Ok(RewardBreakdown {
                correctness_term: correctness,
                length_term,
                total: correctness + cfg.beta * length_term,
            })
        }
        GuidanceMode::Implicit => {
            let range = range.ok_or_else(|| {
                Error::config("Implicit guidance requires the group's Discovery range")
            })?;
            Ok(discovery_total_reward(rollout, range, cfg))
        }
    }
}
