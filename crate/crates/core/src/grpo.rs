//! The optimizer both stages share: group-relative advantages plus a
//! score-function parameter step.
//!
//! Advantages are the group's rewards standardized with the population
//! standard deviation and an eps guard; degenerate groups (singleton or
//! zero variance) produce all-zero advantages so training proceeds through
//! them. The update is a single on-policy step
//! delta = lr * mean_i(A_i * grad log p(rollout_i)); no clipping, no KL —
//! with two scalars per problem those add nothing.

use serde::{Deserialize, Serialize};

use crate::policy_env::{log_density_grad, PolicyParams};
use crate::stats::{mean, std_pop};
use crate::types::RolloutGroup;

pub const ADVANTAGE_EPS: f64 = 1e-8;

/// Which stage's update rule applies: Discovery moves mu only;
/// Internalization moves mu and w (w clamped to [0,1] after the step).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Discovery,
    Internalization,
}

impl Stage {
    pub fn label(&self) -> &'static str {
        match self {
            Stage::Discovery => "discovery",
            Stage::Internalization => "internalization",
        }
    }
}

/// A_i = (r_i - mean) / (std_pop + eps). All-equal rewards give all zeros.
pub fn group_advantages(rewards: &[f64], eps: f64) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let m = mean(rewards);
    let s = std_pop(rewards);
    if s == 0.0 {
        return vec![0.0; rewards.len()];
    }
    rewards.iter().map(|r| (r - m) / (s + eps)).collect()
}

/// One GRPO step for one problem's group. Returns the updated params;
/// sigma_gen is never touched.
pub fn apply_update(
    params: &PolicyParams,
    group: &RolloutGroup,
    advantages: &[f64],
    lr: f64,
    stage: Stage,
) -> PolicyParams {
    assert_eq!(
        group.rollouts.len(),
        advantages.len(),
        "advantages must align with the group"
    );
    if group.rollouts.is_empty() {
        return *params;
    }
    let mut grad_mu = 0.0;
    let mut grad_w = 0.0;
    for (rollout, &a) in group.rollouts.iter().zip(advantages) {
        let (g_mu, g_w) = log_density_grad(params, rollout.declared_budget, rollout.length);
        grad_mu += a * g_mu;
        grad_w += a * g_w;
    }
    let n = group.rollouts.len() as f64;
    grad_mu /= n;
    grad_w /= n;

    let mut out = *params;
    out.mu += lr * grad_mu;
    if stage == Stage::Internalization {
        out.w = (out.w + lr * grad_w).clamp(0.0, 1.0);
    }
    out
}
