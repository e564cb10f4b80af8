// Error type shared across the lab. Variants mirror the failure modes the
// module contracts name (EmptySample, BudgetMissing, ...) so callers can
// match on them instead of string-parsing messages.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A statistic was requested over a correct-length sample with no
    /// elements. Callers must handle the no-correct-rollout case themselves.
    #[error("empty correct-length sample")]
    EmptySample,

    /// Exact-guidance reward was asked for a rollout without a declared
    /// budget.
    #[error("rollout has no declared budget but the guidance mode requires one")]
    BudgetMissing,

    /// Configuration rejected at validation time.
    #[error("config error: {0}")]
    Config(String),

    /// Evaluation bank contains no problems.
    #[error("evaluation bank is empty")]
    EmptyBenchmark,

    /// Difficulty-allocation analysis needs at least two tiers.
    #[error("difficulty analysis requires at least 2 tiers, found {0}")]
    InsufficientTiers(usize),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {message}")]
    Json { path: PathBuf, message: String },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Json {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
