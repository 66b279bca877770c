//! Candidate selection strategies and the reasoning-step episode driver.

mod episode;
mod select;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::PolicyError;
use crate::rollout::RolloutError;
use crate::taskworld::{SuiteTag, WorldError};
use crate::verify::VerifyError;

pub use episode::{run_episode, CandidateTrace, Episode, SegmentTrace, TrialRecord};
pub use select::{heuristic_value, seal_select, value_select, Selection};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteerError {
    #[error("invalid steer config: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Verified early-exit selection against the plan.
    Seal,
    /// Highest heuristic value of the predicted outcome.
    Value,
    /// Reasoning policy, one sample, no steering.
    None,
    /// Instruction-conditioned policy without plans.
    Vanilla,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Seal => "seal",
            Strategy::Value => "value",
            Strategy::None => "none",
            Strategy::Vanilla => "vanilla",
        }
    }

    /// Strategies that sample a single candidate regardless of K.
    pub fn is_single_sample(self) -> bool {
        matches!(self, Strategy::None | Strategy::Vanilla)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What to execute when every verdict rejects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    EarliestFinished,
    Random,
    Longest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteerConfig {
    pub strategy: Strategy,
    pub k: usize,
    pub fallback: Fallback,
    /// Weight the value heuristic gives to non-task objects sitting in task
    /// fixtures, per suite.
    pub value_miscalibration: BTreeMap<SuiteTag, f64>,
    /// Value strategy only: re-select every `chunk_len` actions.
    pub chunk_len: Option<usize>,
    /// Per-step probability that predicted dynamics diverge from the true ones.
    pub dynamics_noise: f64,
    /// Global env-step budget per episode; defaults to 40 * h_max.
    pub step_budget: Option<u64>,
}

impl Default for SteerConfig {
    fn default() -> Self {
        let value_miscalibration = [
            (SuiteTag::VisualScene, 0.5),
            (SuiteTag::VisualViewpoint, 2.0),
            (SuiteTag::Compose, 2.0),
        ]
        .into_iter()
        .collect();
        Self {
            strategy: Strategy::Seal,
            k: 10,
            fallback: Fallback::EarliestFinished,
            value_miscalibration,
            chunk_len: None,
            dynamics_noise: 0.0,
            step_budget: None,
        }
    }
}

impl SteerConfig {
    pub fn with(strategy: Strategy, k: usize) -> Self {
        Self { strategy, k, ..Self::default() }
    }

    pub fn miscalibration(&self, suite: SuiteTag) -> f64 {
        self.value_miscalibration.get(&suite).copied().unwrap_or(0.0)
    }

    /// Pool size actually sampled.
    pub fn effective_k(&self) -> usize {
        if self.strategy.is_single_sample() {
            1
        } else {
            self.k
        }
    }

    pub fn validate(&self) -> Result<(), SteerError> {
        if self.k < 1 {
            return Err(SteerError::Config("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.dynamics_noise) {
            return Err(SteerError::Config(format!(
                "dynamics_noise = {} is not a probability",
                self.dynamics_noise
            )));
        }
        if self.chunk_len == Some(0) {
            return Err(SteerError::Config("chunk_len must be positive".into()));
        }
        if self.step_budget == Some(0) {
            return Err(SteerError::Config("step_budget must be positive".into()));
        }
        if self.value_miscalibration.values().any(|v| !v.is_finite()) {
            return Err(SteerError::Config("value_miscalibration must be finite".into()));
        }
        Ok(())
    }
}
