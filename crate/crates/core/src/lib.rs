//! lapo-core: a simulation lab for Length-Adaptive Policy Optimization.
//!
//! LAPO trains a reasoning policy to use fewer tokens without losing
//! accuracy, in two GRPO stages: Discovery learns *what* lengths suffice
//! (rewarding correct answers inside the group's typical-length band and
//! recording the per-problem target in a length map), and Internalization
//! learns to *hit* a self-declared budget read back from that map
//! (Gaussian adherence reward plus a min-ratchet on the map).
//!
//! Instead of an LLM, the policy here is a per-problem log-normal length
//! generator with an explicit log-density, graded by a difficulty-dependent
//! synthetic environment — small enough that every quantity has a closed
//! form, faithful enough that the published trends (length compression at
//! held accuracy, difficulty-aware allocation, ablation directions)
//! reproduce at desk scale in seconds.
//!
//! Module map:
//! - [`types`]: rollouts, groups, configs, problems, banks
//! - [`stats`]: percentiles, ranges, target statistics, Spearman
//! - [`rewards`]: both stages' reward functions and guidance variants
//! - [`length_map`]: the persistent problem -> target map
//! - [`policy_env`]: the synthetic policy + correctness model
//! - [`grpo`]: advantages and the score-function update
//! - [`rng`]: counter-based deterministic streams
//! - [`config`]: the TOML run config
//! - [`pipeline`]: the two-stage training loop
//! - [`eval`]: pass@1 / token evaluation and difficulty allocation
//! - [`ablation`]: statistic and guidance sweeps
//! - [`analysis`]: reasoning-trace keyword frequencies

pub mod ablation;
pub mod analysis;
pub mod config;
pub mod error;
pub mod eval;
pub mod grpo;
pub mod length_map;
pub mod pipeline;
pub mod policy_env;
pub mod rewards;
pub mod rng;
pub mod stats;
pub mod types;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use grpo::Stage;
pub use length_map::LengthMap;
pub use pipeline::{run_lapo, RunOutcome, StepRecord};
pub use policy_env::{EnvModel, PolicyParams, PolicyTable};
pub use types::{Problem, Rollout, RolloutGroup};
