//! The declarative run configuration: one TOML file drives training,
//! evaluation and ablations. Unknown keys are rejected everywhere so
//! ablation arms cannot silently diverge, and all randomness flows from the
//! single `seed` field.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy_env::{comfortably_inside_support, EnvModel};
use crate::rewards::GuidanceMode;
use crate::rng::{fnv1a64, stage_seed};
use crate::stats::TargetStatistic;
use crate::types::{RewardConfig, StageConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// The bundled default config. The environment and optimizer constants here
/// are calibrated for the synthetic policy so the default run shows the
/// intended compression-without-accuracy-loss behavior at desk scale; see
/// the README for the shape of the tuning.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("default_config.toml");

/// Initial per-problem policy: every problem starts at mu = ln(init_length)
/// with the given log-space spread and w = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyInit {
    pub init_length: u32,
    pub sigma_gen: f64,
}

impl Default for PolicyInit {
    fn default() -> Self {
        PolicyInit {
            init_length: 1200,
            sigma_gen: 0.25,
        }
    }
}

/// One stage's schedule as written in the file; `seed` may be omitted to
/// derive it from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageSection {
    pub episodes: u32,
    pub steps_per_episode: u32,
    pub rollouts_per_problem: u32,
    pub batch_size: u32,
    pub max_generation_length: u32,
    pub learning_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for StageSection {
    fn default() -> Self {
        let d = StageConfig::default();
        StageSection {
            episodes: d.episodes,
            steps_per_episode: d.steps_per_episode,
            rollouts_per_problem: d.rollouts_per_problem,
            batch_size: d.batch_size,
            max_generation_length: d.max_generation_length,
            learning_rate: d.learning_rate,
            seed: None,
        }
    }
}

impl StageSection {
    fn resolve(&self, run_seed: u64, tag: &str) -> StageConfig {
        StageConfig {
            episodes: self.episodes,
            steps_per_episode: self.steps_per_episode,
            rollouts_per_problem: self.rollouts_per_problem,
            batch_size: self.batch_size,
            max_generation_length: self.max_generation_length,
            learning_rate: self.learning_rate,
            seed: self.seed.unwrap_or_else(|| stage_seed(run_seed, tag)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub samples_per_problem: u32,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            samples_per_problem: 64,
        }
    }
}

/// The whole run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// JSON problem bank; omit to use the bundled 5-tier synthetic bank.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bank_path: Option<PathBuf>,
    pub target_statistic: TargetStatistic,
    pub guidance_mode: GuidanceMode,
    pub policy: PolicyInit,
    pub env: EnvModel,
    pub rewards: RewardConfig,
    pub discovery: StageSection,
    pub internalization: StageSection,
    pub eval: EvalSection,
}

/// Type-level defaults: the documented per-type defaults (uncalibrated
/// environment, 0.05 learning rate). Missing config-file sections resolve
/// to these. The tuned defaults live in the bundled file — see `bundled`.
impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: 7,
            output_dir: PathBuf::from("runs/lapo"),
            bank_path: None,
            target_statistic: TargetStatistic::default(),
            guidance_mode: GuidanceMode::default(),
            policy: PolicyInit::default(),
            env: EnvModel::default(),
            rewards: RewardConfig::default(),
            discovery: StageSection::default(),
            internalization: StageSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    /// The calibrated bundled config (what `train` runs when given no file).
    pub fn bundled() -> Self {
        let cfg: RunConfig =
            toml::from_str(DEFAULT_CONFIG_TOML).expect("bundled default config parses");
        cfg.validate().expect("bundled default config validates");
        cfg
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            Error::config(format!("{}: {}", origin.display(), e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {} (this build understands {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.policy.init_length == 0 {
            return Err(Error::config("policy.init_length must be >= 1"));
        }
        if self.policy.sigma_gen <= 0.0 || !self.policy.sigma_gen.is_finite() {
            return Err(Error::config("policy.sigma_gen must be positive"));
        }
        self.env.validate()?;
        self.rewards.validate()?;
        let d = self.discovery_stage();
        let i = self.internalization_stage();
        d.validate()?;
        i.validate()?;
        if d.max_generation_length != i.max_generation_length {
            return Err(Error::config(format!(
                "max_generation_length must agree across stages ({} vs {}): it doubles as the map default target",
                d.max_generation_length, i.max_generation_length
            )));
        }
        // the log-density ignores the clamp, which is only sound while the
        // initial length mass sits well inside [1, max_generation_length]
        let mu0 = f64::from(self.policy.init_length).ln();
        if !comfortably_inside_support(mu0, self.policy.sigma_gen, d.max_generation_length) {
            return Err(Error::config(format!(
                "policy init (init_length {}, sigma_gen {}) puts too much length mass outside [1, {}]",
                self.policy.init_length, self.policy.sigma_gen, d.max_generation_length
            )));
        }
        if self.eval.samples_per_problem == 0 {
            return Err(Error::config("eval.samples_per_problem must be >= 1"));
        }
        Ok(())
    }

    /// Discovery schedule with a concrete seed.
    pub fn discovery_stage(&self) -> StageConfig {
        self.discovery.resolve(self.seed, "discovery")
    }

    /// Internalization schedule with a concrete seed.
    pub fn internalization_stage(&self) -> StageConfig {
        self.internalization.resolve(self.seed, "internalization")
    }

    pub fn max_generation_length(&self) -> u32 {
        self.discovery.max_generation_length
    }

    /// The config echo written into every run directory: same file, stage
    /// seeds made explicit.
    pub fn resolved(&self) -> RunConfig {
        let mut out = self.clone();
        out.discovery.seed = Some(self.discovery_stage().seed);
        out.internalization.seed = Some(self.internalization_stage().seed);
        out
    }

    pub fn echo_toml(&self) -> String {
        toml::to_string_pretty(&self.resolved()).expect("config serializes")
    }

    /// Stable content hash of the resolved config (hex), stamped into
    /// rollout-log headers.
    pub fn content_hash(&self) -> String {
        format!("{:016x}", fnv1a64(&self.echo_toml()))
    }
}
