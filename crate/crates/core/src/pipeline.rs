//! The two-stage training loop (Algorithm 1): Discovery builds the length
//! map from unconditioned rollouts; Internalization conditions on the
//! stored budgets and tightens them with the min rule.
//!
//! Step anatomy, identical in both stages and normalized to
//! sample -> reward -> map update -> policy update:
//!   1. sample N rollouts per problem in the batch (parallel, counter-keyed
//!      RNG streams so thread count never changes the draws),
//!   2. compute rewards and group advantages,
//!   3. commit staged map updates (so within a step every problem saw the
//!      pre-step map — conditioning budgets are never half-updated),
//!   4. apply the GRPO parameter step.
//!
//! Batching is epoch-style: problems are shuffled and partitioned into
//! ceil(|bank|/batch_size) chunks; each chunk is one step's batch and every
//! problem appears exactly once per shuffle cycle. Episodes consume
//! steps_per_episode chunks, starting a fresh cycle at each episode
//! boundary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grpo::{apply_update, group_advantages, Stage, ADVANTAGE_EPS};
use crate::length_map::LengthMap;
use crate::policy_env::{rollout_group, PolicyParams, PolicyTable};
use crate::rewards::{
    discovery_total_reward, guidance_range_for, guidance_variant_reward,
    internalization_total_reward, GuidanceMode,
};
use crate::rng::{rollout_stream, shuffle_indices, shuffle_stream};
use crate::stats::compute_range;
use crate::types::{CorrectLengthSample, Problem, RolloutGroup, StageConfig};

/// One step-log line: everything that happened to one problem in one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub stage: String,
    pub problem_id: String,
    /// Conditioning budget; null during Discovery and in Implicit guidance.
    pub n: Option<u32>,
    pub lengths: Vec<u32>,
    pub corrects: Vec<bool>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub map_target_after: u32,
}

/// Per-step aggregates over the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub stage: String,
    pub mean_reward: f64,
    pub mean_length: f64,
    pub accuracy: f64,
}

/// Everything a finished run hands back, including the stage-boundary
/// snapshots the ablation and acceptance harnesses compare against.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub policy_init: PolicyTable,
    pub policy_after_discovery: PolicyTable,
    pub map_after_discovery: LengthMap,
    pub policy: PolicyTable,
    pub map: LengthMap,
    pub metrics: Vec<StepMetrics>,
}

/// Eq. 6 budget prompt, verbatim. The synthetic policy consumes only the
/// integer, but the rendered string is what a real-LLM backend would see,
/// so it is kept exact and logged.
pub fn render_budget_prefix(n: u32) -> String {
    format!("<think> I will answer the question with {n} tokens.")
}

/// Range-guidance variant of the prompt (constructed: the band, not the
/// point target, is revealed).
pub fn render_range_prefix(lo: u32, hi: u32) -> String {
    format!("<think> I will answer the question with between {lo} and {hi} tokens.")
}

fn validate_bank(bank: &[Problem]) -> Result<()> {
    if bank.is_empty() {
        return Err(Error::EmptyBenchmark);
    }
    let mut ids: Vec<&str> = bank.iter().map(|p| p.id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("problem bank contains duplicate ids"));
    }
    Ok(())
}

struct ProblemOutcome {
    bank_idx: usize,
    group: RolloutGroup,
    sample: CorrectLengthSample,
    n: Option<u32>,
    rewards: Vec<f64>,
    advantages: Vec<f64>,
    new_params: PolicyParams,
}

fn problem_step(
    stage: Stage,
    cfg: &RunConfig,
    stage_cfg: &StageConfig,
    bank_idx: usize,
    problem: &Problem,
    params: &PolicyParams,
    map: &LengthMap,
    step: u64,
) -> Result<ProblemOutcome> {
    let budget = match stage {
        Stage::Discovery => None,
        Stage::Internalization => {
            let n = map.get_target(&problem.id);
            match cfg.guidance_mode {
                GuidanceMode::Exact => {
                    log::debug!(target: "lapo::prompt", "{} {}", problem.id, render_budget_prefix(n));
                    Some(n)
                }
                GuidanceMode::Range => {
                    let band = guidance_range_for(n);
                    log::debug!(target: "lapo::prompt", "{} {}", problem.id, render_range_prefix(band.lo, band.hi));
                    Some(n)
                }
                GuidanceMode::Implicit => None,
            }
        }
    };

    let group = rollout_group(
        params,
        &cfg.env,
        problem,
        budget,
        stage_cfg.rollouts_per_problem,
        stage_cfg.max_generation_length,
        |s| rollout_stream(stage_cfg.seed, &problem.id, step, u64::from(s)),
    );
    let sample = group.correct_lengths();

    let rewards: Vec<f64> = match stage {
        Stage::Discovery => {
            if sample.is_empty() {
                // no correct responses: no range exists and every reward
                // term is gated, so the whole group scores zero
                vec![0.0; group.rollouts.len()]
            } else {
                let range = compute_range(&sample)?;
                group
                    .rollouts
                    .iter()
                    .map(|r| discovery_total_reward(r, range, &cfg.rewards).total)
                    .collect()
            }
        }
        Stage::Internalization => match cfg.guidance_mode {
            GuidanceMode::Exact => group
                .rollouts
                .iter()
                .map(|r| internalization_total_reward(r, &cfg.rewards).map(|b| b.total))
                .collect::<Result<_>>()?,
            GuidanceMode::Range => {
                let n = budget.expect("range guidance always conditions");
                let band = guidance_range_for(n);
                group
                    .rollouts
                    .iter()
                    .map(|r| {
                        guidance_variant_reward(r, GuidanceMode::Range, Some(n), Some(band), &cfg.rewards)
                            .map(|b| b.total)
                    })
                    .collect::<Result<_>>()?
            }
            GuidanceMode::Implicit => {
                if sample.is_empty() {
                    vec![0.0; group.rollouts.len()]
                } else {
                    let band = compute_range(&sample)?;
                    group
                        .rollouts
                        .iter()
                        .map(|r| {
                            guidance_variant_reward(r, GuidanceMode::Implicit, None, Some(band), &cfg.rewards)
                                .map(|b| b.total)
                        })
                        .collect::<Result<_>>()?
                }
            }
        },
    };

    let advantages = group_advantages(&rewards, ADVANTAGE_EPS);
    let new_params = apply_update(params, &group, &advantages, stage_cfg.learning_rate, stage);
    Ok(ProblemOutcome {
        bank_idx,
        group,
        sample,
        n: budget,
        rewards,
        advantages,
        new_params,
    })
}

/// Run one stage in place, mutating the policy and map, emitting one
/// StepRecord per (step, problem) into `sink`, and returning per-step
/// metrics. A zero-episode stage is a no-op.
pub fn run_stage(
    stage: Stage,
    cfg: &RunConfig,
    bank: &[Problem],
    policy: &mut PolicyTable,
    map: &mut LengthMap,
    sink: &mut dyn FnMut(&StepRecord),
) -> Result<Vec<StepMetrics>> {
    validate_bank(bank)?;
    for p in bank {
        if policy.get(&p.id).is_none() {
            return Err(Error::config(format!("policy has no entry for problem {:?}", p.id)));
        }
    }
    let stage_cfg = match stage {
        Stage::Discovery => cfg.discovery_stage(),
        Stage::Internalization => cfg.internalization_stage(),
    };
    let mut metrics = Vec::new();
    if stage_cfg.episodes == 0 {
        return Ok(metrics);
    }

    let mut cycle: u64 = 0;
    let mut step: u64 = 0;
    for _episode in 0..stage_cfg.episodes {
        let mut steps_left = stage_cfg.steps_per_episode;
        while steps_left > 0 {
            let order = shuffle_indices(bank.len(), &mut shuffle_stream(stage_cfg.seed, cycle));
            cycle += 1;
            for chunk in order.chunks(stage_cfg.batch_size as usize) {
                if steps_left == 0 {
                    break;
                }
                let outcomes: Result<Vec<ProblemOutcome>> = chunk
                    .par_iter()
                    .map(|&idx| {
                        let problem = &bank[idx];
                        let params = policy.get(&problem.id).expect("coverage checked above");
                        problem_step(stage, cfg, &stage_cfg, idx, problem, params, map, step)
                    })
                    .collect();
                let outcomes = outcomes?;

                // commit phase: map first, then parameters (the normalized
                // Algorithm 1 order), then the log records
                for o in &outcomes {
                    let id = &bank[o.bank_idx].id;
                    match stage {
                        Stage::Discovery => {
                            map.update_discovery(id, &o.sample, cfg.target_statistic)
                        }
                        Stage::Internalization => {
                            map.update_internalization(id, &o.sample, cfg.target_statistic)
                        }
                    }
                }
                let mut reward_sum = 0.0;
                let mut length_sum = 0.0;
                let mut correct_sum = 0usize;
                let mut rollout_count = 0usize;
                for o in &outcomes {
                    let id = &bank[o.bank_idx].id;
                    *policy.get_mut(id).expect("coverage checked above") = o.new_params;
                    reward_sum += o.rewards.iter().sum::<f64>();
                    length_sum += o.group.rollouts.iter().map(|r| f64::from(r.length)).sum::<f64>();
                    correct_sum += o.group.rollouts.iter().filter(|r| r.correct).count();
                    rollout_count += o.group.rollouts.len();
                    let record = StepRecord {
                        step,
                        stage: stage.label().to_string(),
                        problem_id: id.clone(),
                        n: o.n,
                        lengths: o.group.rollouts.iter().map(|r| r.length).collect(),
                        corrects: o.group.rollouts.iter().map(|r| r.correct).collect(),
                        rewards: o.rewards.clone(),
                        advantages: o.advantages.clone(),
                        map_target_after: map.get_target(id),
                    };
                    sink(&record);
                }
                metrics.push(StepMetrics {
                    step,
                    stage: stage.label().to_string(),
                    mean_reward: reward_sum / rollout_count as f64,
                    mean_length: length_sum / rollout_count as f64,
                    accuracy: correct_sum as f64 / rollout_count as f64,
                });
                step += 1;
                steps_left -= 1;
            }
        }
    }
    Ok(metrics)
}

/// Algorithm 1 end to end: fresh policy and map, Discovery, then
/// Internalization seeded from the Discovery output.
pub fn run_lapo(
    cfg: &RunConfig,
    bank: &[Problem],
    sink: &mut dyn FnMut(&StepRecord),
) -> Result<RunOutcome> {
    validate_bank(bank)?;
    let mut policy = PolicyTable::init(bank, cfg.policy.init_length, cfg.policy.sigma_gen);
    let mut map = LengthMap::new(cfg.max_generation_length());
    let policy_init = policy.clone();

    let mut metrics = run_stage(Stage::Discovery, cfg, bank, &mut policy, &mut map, sink)?;
    let policy_after_discovery = policy.clone();
    let map_after_discovery = map.clone();

    metrics.extend(run_stage(
        Stage::Internalization,
        cfg,
        bank,
        &mut policy,
        &mut map,
        sink,
    )?);

    Ok(RunOutcome {
        policy_init,
        policy_after_discovery,
        map_after_discovery,
        policy,
        map,
        metrics,
    })
}
