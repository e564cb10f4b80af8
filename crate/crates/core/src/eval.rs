//! Benchmark evaluation (pass@1 + token counts), difficulty-allocation
//! analysis, and the report-table formatting helpers.
//!
//! Evaluation RNG streams are keyed by (seed, problem, sample) only — not
//! by training step or arm — so before/after comparisons and ablation arms
//! are paired: the same eval draws grade every checkpoint (common random
//! numbers).

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::length_map::LengthMap;
use crate::pipeline::RunOutcome;
use crate::policy_env::{sample_rollout, EnvModel, PolicyTable};
use crate::rewards::GuidanceMode;
use crate::rng::eval_stream;
use crate::stats::spearman;
use crate::types::Problem;

/// Whether evaluation conditions generation on the length map.
#[derive(Debug, Clone, Copy)]
pub enum BudgetMode<'a> {
    Unconditioned,
    FromMap(&'a LengthMap),
}

/// Per-difficulty-tier aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierStat {
    pub difficulty: f64,
    pub problems: usize,
    pub pass1: f64,
    pub mean_length: f64,
}

/// Per-benchmark aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkStat {
    pub benchmark_tag: String,
    pub problems: usize,
    pub pass1: f64,
    pub avg_tokens: f64,
    pub tiers: Vec<TierStat>,
}

/// A full evaluation: overall numbers plus the per-benchmark breakdown.
/// pass@1 is the mean over problems of per-problem mean correctness across
/// the k samples; avg_tokens is the same aggregation applied to length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples_per_problem: u32,
    pub pass1: f64,
    pub avg_tokens: f64,
    pub benchmarks: Vec<BenchmarkStat>,
}

struct ProblemStat {
    id: String,
    tag: String,
    difficulty: f64,
    pass1: f64,
    mean_length: f64,
}

/// Sample k rollouts per problem and aggregate. Conditioning (if any) uses
/// the map's current target per problem.
pub fn evaluate(
    policy: &PolicyTable,
    env: &EnvModel,
    bank: &[Problem],
    k: u32,
    budget: BudgetMode,
    seed: u64,
    max_length: u32,
) -> Result<EvalReport> {
    if bank.is_empty() {
        return Err(Error::EmptyBenchmark);
    }
    if k == 0 {
        return Err(Error::config("evaluation needs k >= 1 samples per problem"));
    }
    let mut stats = Vec::with_capacity(bank.len());
    for problem in bank {
        let params = policy
            .get(&problem.id)
            .ok_or_else(|| Error::config(format!("policy has no entry for problem {:?}", problem.id)))?;
        let n = match budget {
            BudgetMode::Unconditioned => None,
            BudgetMode::FromMap(map) => Some(map.get_target(&problem.id)),
        };
        let mut correct = 0u32;
        let mut length_sum = 0u64;
        for s in 0..k {
            let mut rng = eval_stream(seed, &problem.id, u64::from(s));
            let r = sample_rollout(params, env, problem, n, max_length, &mut rng);
            correct += u32::from(r.correct);
            length_sum += u64::from(r.length);
        }
        stats.push(ProblemStat {
            id: problem.id.clone(),
            tag: problem.benchmark_tag.clone(),
            difficulty: problem.difficulty,
            pass1: f64::from(correct) / f64::from(k),
            mean_length: length_sum as f64 / f64::from(k),
        });
    }
    // canonical order so the report is exactly invariant to bank order
    stats.sort_by(|a, b| a.id.cmp(&b.id));

    let mut benchmarks = Vec::new();
    let mut tags: Vec<&str> = stats.iter().map(|s| s.tag.as_str()).collect();
    tags.sort_unstable();
    tags.dedup();
    for tag in tags {
        let of_tag: Vec<&ProblemStat> = stats.iter().filter(|s| s.tag == tag).collect();
        let mut difficulties: Vec<f64> = of_tag.iter().map(|s| s.difficulty).collect();
        difficulties.sort_by(f64::total_cmp);
        difficulties.dedup();
        let tiers = difficulties
            .iter()
            .map(|&d| {
                let members: Vec<&&ProblemStat> =
                    of_tag.iter().filter(|s| s.difficulty == d).collect();
                TierStat {
                    difficulty: d,
                    problems: members.len(),
                    pass1: members.iter().map(|s| s.pass1).sum::<f64>() / members.len() as f64,
                    mean_length: members.iter().map(|s| s.mean_length).sum::<f64>()
                        / members.len() as f64,
                }
            })
            .collect();
        benchmarks.push(BenchmarkStat {
            benchmark_tag: tag.to_string(),
            problems: of_tag.len(),
            pass1: of_tag.iter().map(|s| s.pass1).sum::<f64>() / of_tag.len() as f64,
            avg_tokens: of_tag.iter().map(|s| s.mean_length).sum::<f64>() / of_tag.len() as f64,
            tiers,
        });
    }
    Ok(EvalReport {
        samples_per_problem: k,
        pass1: stats.iter().map(|s| s.pass1).sum::<f64>() / stats.len() as f64,
        avg_tokens: stats.iter().map(|s| s.mean_length).sum::<f64>() / stats.len() as f64,
        benchmarks,
    })
}

/// The standard after-training evaluation: conditioned on the final map
/// when an Internalization stage ran with a budget in the prompt, plain
/// otherwise (Implicit-trained policies never see budgets at inference).
pub fn eval_final(cfg: &RunConfig, outcome: &RunOutcome, bank: &[Problem]) -> Result<EvalReport> {
    let conditioned = cfg.internalization_stage().episodes > 0
        && cfg.guidance_mode != GuidanceMode::Implicit;
    let mode = if conditioned {
        BudgetMode::FromMap(&outcome.map)
    } else {
        BudgetMode::Unconditioned
    };
    evaluate(
        &outcome.policy,
        &cfg.env,
        bank,
        cfg.eval.samples_per_problem,
        mode,
        cfg.seed,
        cfg.max_generation_length(),
    )
}

/// Difficulty-allocation summary (tiers pooled across benchmarks, weighted
/// by problem count) plus the Spearman correlation between difficulty and
/// mean generated length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub tiers: Vec<TierStat>,
    pub spearman_rho: f64,
}

pub fn difficulty_allocation(report: &EvalReport) -> Result<AllocationReport> {
    let mut difficulties: Vec<f64> = report
        .benchmarks
        .iter()
        .flat_map(|b| b.tiers.iter().map(|t| t.difficulty))
        .collect();
    difficulties.sort_by(f64::total_cmp);
    difficulties.dedup();
    if difficulties.len() < 2 {
        return Err(Error::InsufficientTiers(difficulties.len()));
    }
    let tiers: Vec<TierStat> = difficulties
        .iter()
        .map(|&d| {
            let members: Vec<&TierStat> = report
                .benchmarks
                .iter()
                .flat_map(|b| b.tiers.iter())
                .filter(|t| t.difficulty == d)
                .collect();
            let problems: usize = members.iter().map(|t| t.problems).sum();
            let weight = |f: fn(&TierStat) -> f64| {
                members.iter().map(|t| f(t) * t.problems as f64).sum::<f64>() / problems as f64
            };
            TierStat {
                difficulty: d,
                problems,
                pass1: weight(|t| t.pass1),
                mean_length: weight(|t| t.mean_length),
            }
        })
        .collect();
    let xs: Vec<f64> = tiers.iter().map(|t| t.difficulty).collect();
    let ys: Vec<f64> = tiers.iter().map(|t| t.mean_length).collect();
    let spearman_rho = spearman(&xs, &ys)?;
    Ok(AllocationReport { tiers, spearman_rho })
}

/// Report-table formatting: pass@1 as a percentage with one decimal.
pub fn format_pass1(pass1: f64) -> String {
    format!("{:.1}", pass1 * 100.0)
}

/// Report-table formatting: token counts as whole numbers.
pub fn format_tokens(avg_tokens: f64) -> String {
    format!("{}", avg_tokens.round() as i64)
}
