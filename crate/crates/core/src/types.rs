//! Core value types: rollouts, groups, samples, ranges, reward/stage
//! configuration, problems and problem banks.
//!
//! Everything here is an immutable value object; the pipeline owns the
//! mutable state. Banks are JSON arrays; rollout logs are JSON-lines with a
//! run-header line carrying the config hash and seed.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sampled response: a token count plus the environment's verdict.
/// `declared_budget` is present only for budget-conditioned rollouts
/// (Internalization with Exact/Range guidance), so reward computation is
/// stateless given the rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub problem_id: String,
    pub length: u32,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_budget: Option<u32>,
}

/// The N rollouts GRPO treats as one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub problem_id: String,
    pub rollouts: Vec<Rollout>,
}

impl RolloutGroup {
    /// Lengths of the correct rollouts (the sample the percentile range and
    /// map targets are computed from). May be empty.
    pub fn correct_lengths(&self) -> CorrectLengthSample {
        CorrectLengthSample::new(
            self.rollouts
                .iter()
                .filter(|r| r.correct)
                .map(|r| r.length)
                .collect(),
        )
    }
}

/// Multiset of correct-response lengths. No deduplication: rollouts are
/// independent samples, so equal lengths are distinct observations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorrectLengthSample {
    lengths: Vec<u32>,
}

impl CorrectLengthSample {
    pub fn new(lengths: Vec<u32>) -> Self {
        CorrectLengthSample { lengths }
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.lengths
    }
}

impl From<Vec<u32>> for CorrectLengthSample {
    fn from(lengths: Vec<u32>) -> Self {
        CorrectLengthSample::new(lengths)
    }
}

/// The [P30, P70] band of Eq. 2, rounded to whole tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthRange {
    pub lo: u32,
    pub hi: u32,
}

impl LengthRange {
    pub fn new(lo: u32, hi: u32) -> Result<Self> {
        if lo > hi {
            return Err(Error::config(format!("length range lo {lo} > hi {hi}")));
        }
        Ok(LengthRange { lo, hi })
    }

    pub fn contains(&self, length: u32) -> bool {
        self.lo <= length && length <= self.hi
    }
}

/// How the Gaussian tolerance sigma of the adherence reward is derived from
/// the target n. TOML form: `sigma_mode = { ratio = 0.1 }` or
/// `sigma_mode = { tokens = 120 }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaMode {
    ProportionalToTarget { ratio: f64 },
    Fixed { tokens: u32 },
}

impl Default for SigmaMode {
    fn default() -> Self {
        SigmaMode::ProportionalToTarget { ratio: 0.1 }
    }
}

/// Reward hyperparameters for both stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// Weight of the Discovery length reward (Eq. 4).
    pub alpha: f64,
    /// Weight of the Internalization adherence reward (Eq. 7).
    pub beta: f64,
    /// Tolerance of the adherence Gaussian (Eq. 8; value unspecified there).
    pub sigma_mode: SigmaMode,
    /// Divisor of the out-of-range distance penalty (the 100 in Eq. 5).
    pub distance_scale: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: 0.7,
            beta: 0.8,
            sigma_mode: SigmaMode::default(),
            distance_scale: 100.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::config("alpha must be a finite non-negative real"));
        }
        if self.beta < 0.0 || !self.beta.is_finite() {
            return Err(Error::config("beta must be a finite non-negative real"));
        }
        if self.distance_scale <= 0.0 || !self.distance_scale.is_finite() {
            return Err(Error::config("distance_scale must be positive"));
        }
        match self.sigma_mode {
            SigmaMode::ProportionalToTarget { ratio } => {
                if ratio <= 0.0 || !ratio.is_finite() {
                    return Err(Error::config("sigma_mode ratio must be positive"));
                }
            }
            SigmaMode::Fixed { tokens } => {
                if tokens == 0 {
                    return Err(Error::config("sigma_mode tokens must be >= 1"));
                }
            }
        }
        Ok(())
    }
}

/// Per-stage schedule and optimizer settings. One instance for Discovery
/// (E1) and one for Internalization (E2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    /// Number of episodes; 0 skips the stage entirely (a pure LAPO-D run
    /// sets internalization episodes to 0).
    pub episodes: u32,
    pub steps_per_episode: u32,
    /// Group size N.
    pub rollouts_per_problem: u32,
    pub batch_size: u32,
    pub max_generation_length: u32,
    /// Step size, on the simulator's scale: the synthetic policy updates raw
    /// distribution parameters, so this sits orders of magnitude above an
    /// LLM fine-tuning rate.
    pub learning_rate: f64,
    /// Seed for this stage's streams; derived from the run seed unless the
    /// config pins it.
    pub seed: u64,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            episodes: 3,
            steps_per_episode: 80,
            rollouts_per_problem: 8,
            batch_size: 128,
            max_generation_length: 4096,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        // episodes may be 0 (stage skip); every other count must be >= 1.
        if self.steps_per_episode == 0 {
            return Err(Error::config("steps_per_episode must be >= 1"));
        }
        if self.rollouts_per_problem == 0 {
            return Err(Error::config("rollouts_per_problem must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if self.max_generation_length == 0 {
            return Err(Error::config("max_generation_length must be >= 1"));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::config("learning_rate must be positive"));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        u64::from(self.episodes) * u64::from(self.steps_per_episode)
    }
}

/// Decomposition of a total reward, so logs can show which term drove it.
/// total = correctness_term + coefficient * length_term, where the
/// coefficient is alpha in Discovery and beta in Internalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub correctness_term: f64,
    pub length_term: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn zero() -> Self {
        RewardBreakdown {
            correctness_term: 0.0,
            length_term: 0.0,
            total: 0.0,
        }
    }
}

/// One entry of a problem bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub id: String,
    /// Difficulty in [1, 5]; drives the environment's ceiling and
    /// saturation scale.
    pub difficulty: f64,
    pub benchmark_tag: String,
}

/// The bundled evaluation bank: 5 difficulty tiers x 40 problems under a
/// single benchmark tag.
pub fn default_bank() -> Vec<Problem> {
    let mut bank = Vec::with_capacity(200);
    for tier in 1..=5u32 {
        for q in 0..40u32 {
            bank.push(Problem {
                id: format!("d{tier}-q{q:02}"),
                difficulty: f64::from(tier),
                benchmark_tag: "synthetic-5tier".to_string(),
            });
        }
    }
    bank
}

pub fn load_bank(path: &Path) -> Result<Vec<Problem>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bank: Vec<Problem> =
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    for p in &bank {
        if !(1.0..=5.0).contains(&p.difficulty) {
            return Err(Error::config(format!(
                "problem {} difficulty {} outside [1, 5]",
                p.id, p.difficulty
            )));
        }
    }
    Ok(bank)
}

pub fn save_bank(bank: &[Problem], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(bank).expect("bank serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Header line of a rollout log: identifies which run produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutLogHeader {
    pub config_hash: String,
    pub seed: u64,
}

/// Write a rollout log: header line first, then one rollout per line.
pub fn write_rollout_log<W: Write>(
    mut w: W,
    header: &RolloutLogHeader,
    rollouts: &[Rollout],
) -> std::io::Result<()> {
    writeln!(w, "{}", serde_json::to_string(header).expect("header serializes"))?;
    for r in rollouts {
        writeln!(w, "{}", serde_json::to_string(r).expect("rollout serializes"))?;
    }
    Ok(())
}

/// Read a rollout log written by `write_rollout_log`.
pub fn read_rollout_log<R: BufRead>(r: R) -> Result<(RolloutLogHeader, Vec<Rollout>)> {
    let mut lines = r.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::config("rollout log is empty (missing header line)"))?
        .map_err(|e| Error::io("<rollout log>", e))?;
    let header: RolloutLogHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::json("<rollout log>", e))?;
    let mut rollouts = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io("<rollout log>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        rollouts.push(serde_json::from_str(&line).map_err(|e| Error::json("<rollout log>", e))?);
    }
    Ok((header, rollouts))
}
