//! The tractable stand-in for the LLM.
//!
//! Per problem the policy is a log-normal length generator: ln L ~
//! Normal(m, sigma_gen^2) with location m = (1-w)*mu + w*ln(budget) when a
//! budget is declared, plain mu otherwise. w in [0,1] is the learned degree
//! of budget adherence; it starts at 0 so Discovery is genuinely
//! unconditioned. The environment grades a response of length L on a
//! difficulty-d problem correct with probability
//! p_max(d) * (1 - exp(-L / tau(d))): longer reasoning helps, with
//! diminishing returns that set in later on harder problems.
//!
//! The explicit log-density (and its exact gradient) is what lets GRPO run
//! as a score-function estimator without autodiff.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Problem, Rollout, RolloutGroup};

/// Two-sided 99.9% normal quantile: Phi(z) = 0.9995.
pub const Z_999: f64 = 3.2905267314919255;

/// Per-problem generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// Location of ln(length) when unconditioned.
    pub mu: f64,
    /// Spread of ln(length).
    pub sigma_gen: f64,
    /// Budget-adherence weight in [0, 1].
    pub w: f64,
}

impl PolicyParams {
    pub fn new(mu: f64, sigma_gen: f64) -> Self {
        PolicyParams { mu, sigma_gen, w: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::config("policy mu must be finite"));
        }
        if self.sigma_gen <= 0.0 || !self.sigma_gen.is_finite() {
            return Err(Error::config("policy sigma_gen must be positive"));
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::config(format!("policy w {} outside [0, 1]", self.w)));
        }
        Ok(())
    }

    /// Location of ln(length) given the (optional) declared budget.
    pub fn location(&self, budget: Option<u32>) -> f64 {
        match budget {
            Some(n) => (1.0 - self.w) * self.mu + self.w * f64::from(n).ln(),
            None => self.mu,
        }
    }
}

/// True iff at least 99.9% of the unconditioned length mass lies inside
/// [1, max_length] — the condition under which ignoring the clamp in the
/// log-density is a safe approximation.
pub fn comfortably_inside_support(mu: f64, sigma_gen: f64, max_length: u32) -> bool {
    let upper = (f64::from(max_length).ln() - mu) / sigma_gen;
    let lower = (mu - 0.0_f64) / sigma_gen; // ln(1) = 0
    upper >= Z_999 && lower >= Z_999
}

/// The correctness model: p_max(d) = base - slope*(d-1), clamped to [0, 1];
/// tau(d) = offset + slope*d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvModel {
    pub p_max_base: f64,
    pub p_max_slope: f64,
    pub tau_offset: f64,
    pub tau_slope: f64,
}

impl Default for EnvModel {
    fn default() -> Self {
        EnvModel {
            p_max_base: 0.98,
            p_max_slope: 0.12,
            tau_offset: 0.0,
            tau_slope: 300.0,
        }
    }
}

impl EnvModel {
    pub fn p_max(&self, difficulty: f64) -> f64 {
        (self.p_max_base - self.p_max_slope * (difficulty - 1.0)).clamp(0.0, 1.0)
    }

    pub fn tau(&self, difficulty: f64) -> f64 {
        self.tau_offset + self.tau_slope * difficulty
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_max_slope < 0.0 {
            return Err(Error::config("p_max_slope must be >= 0 (ceiling non-increasing in difficulty)"));
        }
        if self.tau_slope < 0.0 || self.tau_offset < 0.0 {
            return Err(Error::config("tau_offset and tau_slope must be >= 0"));
        }
        for d in [1.0, 5.0] {
            if self.tau(d) <= 0.0 {
                return Err(Error::config(format!("tau({d}) must be positive")));
            }
            if self.p_max_base - self.p_max_slope * (d - 1.0) > 1.0 {
                return Err(Error::config(format!("p_max({d}) exceeds 1")));
            }
        }
        if self.p_max(1.0) <= 0.0 {
            return Err(Error::config("p_max(1) must be positive"));
        }
        Ok(())
    }
}

/// P(correct | difficulty, length).
pub fn prob_correct(env: &EnvModel, difficulty: f64, length: u32) -> f64 {
    env.p_max(difficulty) * (1.0 - (-f64::from(length) / env.tau(difficulty)).exp())
}

/// Draw one length: round(exp(z)) clamped to [1, max_length].
pub fn sample_length<R: Rng>(
    params: &PolicyParams,
    budget: Option<u32>,
    max_length: u32,
    rng: &mut R,
) -> u32 {
    let z: f64 = rng.sample(StandardNormal);
    let log_len = params.location(budget) + params.sigma_gen * z;
    let len = log_len.exp().round();
    (len.max(1.0).min(f64::from(max_length))) as u32
}

/// Draw one graded rollout: a length, then a Bernoulli(prob_correct) verdict.
pub fn sample_rollout<R: Rng>(
    params: &PolicyParams,
    env: &EnvModel,
    problem: &Problem,
    budget: Option<u32>,
    max_length: u32,
    rng: &mut R,
) -> Rollout {
    let length = sample_length(params, budget, max_length, rng);
    let p = prob_correct(env, problem.difficulty, length);
    let u: f64 = rng.gen();
    Rollout {
        problem_id: problem.id.clone(),
        length,
        correct: u < p,
        declared_budget: budget,
    }
}

/// Draw the N-rollout GRPO group. Each rollout gets its own RNG from
/// `stream` (keyed by sample index), so the group is identical no matter
/// how work is sharded across threads.
pub fn rollout_group<R, F>(
    params: &PolicyParams,
    env: &EnvModel,
    problem: &Problem,
    budget: Option<u32>,
    n: u32,
    max_length: u32,
    mut stream: F,
) -> RolloutGroup
where
    R: Rng,
    F: FnMut(u32) -> R,
{
    let rollouts = (0..n)
        .map(|s| {
            let mut rng = stream(s);
            sample_rollout(params, env, problem, budget, max_length, &mut rng)
        })
        .collect();
    RolloutGroup {
        problem_id: problem.id.clone(),
        rollouts,
    }
}

/// Log-density of a length under the (possibly budget-mixed) log-normal,
/// ignoring the rounding and clamp (valid while the mass sits comfortably
/// inside the support; see `comfortably_inside_support`).
pub fn log_density_length(params: &PolicyParams, budget: Option<u32>, length: u32) -> f64 {
    let l = f64::from(length);
    let m = params.location(budget);
    let s = params.sigma_gen;
    let z = (l.ln() - m) / s;
    -l.ln() - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
}

/// Exact score-function gradients (d/dmu, d/dw) of `log_density_length`.
/// Without a budget the density does not depend on w, so d/dw = 0.
pub fn log_density_grad(params: &PolicyParams, budget: Option<u32>, length: u32) -> (f64, f64) {
    let m = params.location(budget);
    let resid = (f64::from(length).ln() - m) / (params.sigma_gen * params.sigma_gen);
    match budget {
        Some(n) => (
            resid * (1.0 - params.w),
            resid * (f64::from(n).ln() - params.mu),
        ),
        None => (resid, 0.0),
    }
}

/// All per-problem parameters of a run, keyed by problem id (sorted keys
/// for deterministic files).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyTable {
    pub params: BTreeMap<String, PolicyParams>,
}

impl PolicyTable {
    /// Fresh policy: every problem starts at mu = ln(init_length), w = 0.
    pub fn init(problems: &[Problem], init_length: u32, sigma_gen: f64) -> Self {
        let mu = f64::from(init_length.max(1)).ln();
        PolicyTable {
            params: problems
                .iter()
                .map(|p| (p.id.clone(), PolicyParams::new(mu, sigma_gen)))
                .collect(),
        }
    }

    pub fn get(&self, problem_id: &str) -> Option<&PolicyParams> {
        self.params.get(problem_id)
    }

    pub fn get_mut(&mut self, problem_id: &str) -> Option<&mut PolicyParams> {
        self.params.get_mut(problem_id)
    }

    pub fn validate(&self) -> Result<()> {
        for (id, p) in &self.params {
            p.validate()
                .map_err(|e| Error::config(format!("policy entry {id:?}: {e}")))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("policy serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: PolicyTable =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        table.validate()?;
        Ok(table)
    }
}
