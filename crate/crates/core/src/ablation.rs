//! Ablation drivers: the target-statistic sweep (median/mean/minimum) and
//! the guidance-mode sweep (exact/range/implicit).
//!
//! Arms are paired as hard as the design allows: every arm runs from the
//! same seed, so RNG streams (keyed by config-independent counters) are
//! shared until the ablated field actually changes behavior. The guidance
//! sweep additionally shares one Discovery checkpoint across arms, so only
//! Internalization — the stage the prompt actually touches — differs.

use crate::config::RunConfig;
use crate::error::Result;
use crate::eval::{eval_final, EvalReport};
use crate::grpo::Stage;
use crate::length_map::LengthMap;
use crate::pipeline::{run_lapo, run_stage, RunOutcome, StepRecord};
use crate::policy_env::PolicyTable;
use crate::rewards::GuidanceMode;
use crate::stats::TargetStatistic;
use crate::types::Problem;

/// One finished arm: name, the arm's evaluation, and the full outcome for
/// deeper inspection.
#[derive(Debug)]
pub struct AblationArm {
    pub name: &'static str,
    pub report: EvalReport,
    pub outcome: RunOutcome,
}

impl AblationArm {
    pub fn pass1(&self) -> f64 {
        self.report.pass1
    }

    pub fn avg_tokens(&self) -> f64 {
        self.report.avg_tokens
    }
}

/// Keys on which two configs' resolved echoes differ (top-level or
/// section-qualified). The ablation report header carries this so a reader
/// can verify arms differ in exactly one field.
pub fn config_diff_keys(a: &RunConfig, b: &RunConfig) -> Vec<String> {
    let mut keys = Vec::new();
    let (ea, eb) = (a.echo_toml(), b.echo_toml());
    let mut section = String::new();
    let la: Vec<&str> = ea.lines().collect();
    let lb: Vec<&str> = eb.lines().collect();
    for i in 0..la.len().max(lb.len()) {
        let (x, y) = (la.get(i).copied().unwrap_or(""), lb.get(i).copied().unwrap_or(""));
        if x.starts_with('[') {
            section = x.trim_matches(['[', ']']).to_string();
        }
        if x != y {
            let key = x.split('=').next().unwrap_or(x).trim();
            if section.is_empty() {
                keys.push(key.to_string());
            } else {
                keys.push(format!("{section}.{key}"));
            }
        }
    }
    keys.dedup();
    keys
}

/// Target-statistic sweep: three full runs differing only in the statistic
/// that becomes the map target.
pub fn run_target_statistic_ablation(
    cfg: &RunConfig,
    bank: &[Problem],
    sink: &mut dyn FnMut(&str, &StepRecord),
) -> Result<Vec<AblationArm>> {
    let arms: [(&'static str, TargetStatistic); 3] = [
        ("median", TargetStatistic::Median),
        ("mean", TargetStatistic::Mean),
        ("minimum", TargetStatistic::Minimum),
    ];
    let mut out = Vec::with_capacity(arms.len());
    for (name, stat) in arms {
        let mut arm_cfg = cfg.clone();
        arm_cfg.target_statistic = stat;
        debug_assert!(config_diff_keys(cfg, &arm_cfg).len() <= 1);
        let outcome = run_lapo(&arm_cfg, bank, &mut |r| sink(name, r))?;
        let report = eval_final(&arm_cfg, &outcome, bank)?;
        out.push(AblationArm { name, report, outcome });
    }
    Ok(out)
}

/// Guidance-mode sweep: one shared Discovery checkpoint, three
/// Internalization runs under different prompt-guidance modes. Every arm's
/// step log begins with the identical Discovery records.
pub fn run_guidance_ablation(
    cfg: &RunConfig,
    bank: &[Problem],
    sink: &mut dyn FnMut(&str, &StepRecord),
) -> Result<Vec<AblationArm>> {
    let arms: [(&'static str, GuidanceMode); 3] = [
        ("exact", GuidanceMode::Exact),
        ("range", GuidanceMode::Range),
        ("implicit", GuidanceMode::Implicit),
    ];

    let mut policy = PolicyTable::init(bank, cfg.policy.init_length, cfg.policy.sigma_gen);
    let mut map = LengthMap::new(cfg.max_generation_length());
    let policy_init = policy.clone();
    let discovery_metrics = run_stage(Stage::Discovery, cfg, bank, &mut policy, &mut map, &mut |r| {
        for (name, _) in &arms {
            sink(name, r);
        }
    })?;

    let mut out = Vec::with_capacity(arms.len());
    for (name, mode) in arms {
        let mut arm_cfg = cfg.clone();
        arm_cfg.guidance_mode = mode;
        debug_assert!(config_diff_keys(cfg, &arm_cfg).len() <= 1);
        let mut arm_policy = policy.clone();
        let mut arm_map = map.clone();
        let mut metrics = discovery_metrics.clone();
        metrics.extend(run_stage(
            Stage::Internalization,
            &arm_cfg,
            bank,
            &mut arm_policy,
            &mut arm_map,
            &mut |r| sink(name, r),
        )?);
        let outcome = RunOutcome {
            policy_init: policy_init.clone(),
            policy_after_discovery: policy.clone(),
            map_after_discovery: map.clone(),
            policy: arm_policy,
            map: arm_map,
            metrics,
        };
        let report = eval_final(&arm_cfg, &outcome, bank)?;
        out.push(AblationArm { name, report, outcome });
    }
    Ok(out)
}
