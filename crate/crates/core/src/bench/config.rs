use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::policy::PolicyConfig;
use crate::steer::{SteerConfig, Strategy};
use crate::taskworld::{suite_size, SuiteTag};
use crate::verify::LatencyModel;

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum AllTag {
    #[serde(rename = "all")]
    All,
}

/// Task indices to run: the literal string `"all"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "TaskRepr", into = "TaskRepr")]
pub enum TaskSelection {
    All,
    List(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TaskRepr {
    All(AllTag),
    List(Vec<usize>),
}

impl From<TaskRepr> for TaskSelection {
    fn from(r: TaskRepr) -> Self {
        match r {
            TaskRepr::All(_) => TaskSelection::All,
            TaskRepr::List(v) => TaskSelection::List(v),
        }
    }
}

impl From<TaskSelection> for TaskRepr {
    fn from(t: TaskSelection) -> Self {
        match t {
            TaskSelection::All => TaskRepr::All(AllTag::All),
            TaskSelection::List(v) => TaskRepr::List(v),
        }
    }
}

impl TaskSelection {
    pub fn indices(&self, suite: SuiteTag) -> Vec<usize> {
        match self {
            TaskSelection::All => (0..suite_size(suite)).collect(),
            TaskSelection::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub suites: Vec<SuiteTag>,
    pub tasks: TaskSelection,
    pub trials_per_task: u64,
    pub k_sweep: Vec<usize>,
    pub seed0: u64,
    pub policy: PolicyConfig,
    /// Strategy variants to compare; each is crossed with `k_sweep`.
    pub steer: Vec<SteerConfig>,
    pub latency: LatencyModel,
    pub output_dir: PathBuf,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            suites: SuiteTag::ALL.to_vec(),
            tasks: TaskSelection::All,
            trials_per_task: 50,
            k_sweep: vec![1, 2, 5, 10],
            seed0: 0,
            policy: PolicyConfig::default(),
            steer: vec![
                SteerConfig::with(Strategy::Seal, 10),
                SteerConfig::with(Strategy::Value, 10),
                SteerConfig::with(Strategy::None, 1),
            ],
            latency: LatencyModel::calibrated(),
            output_dir: PathBuf::from("results"),
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.suites.is_empty() {
            return bad("suites is empty".into());
        }
        if self.trials_per_task < 1 {
            return bad("trials_per_task must be at least 1".into());
        }
        if self.k_sweep.is_empty() || self.k_sweep.contains(&0) {
            return bad("k_sweep must be nonempty with every K >= 1".into());
        }
        if self.steer.is_empty() {
            return bad("steer lists no strategies".into());
        }
        let mut seen = BTreeSet::new();
        for s in &self.steer {
            s.validate()?;
            if !seen.insert(s.strategy) {
                return bad(format!("strategy {} listed twice", s.strategy));
            }
        }
        for &suite in &self.suites {
            let n = suite_size(suite);
            if let Some(&i) = self.tasks.indices(suite).iter().find(|&&i| i >= n) {
                return bad(format!("task {i} out of range for {suite} ({n} tasks)"));
            }
        }
        self.policy.validate()?;
        self.latency.validate()?;
        Ok(())
    }

    /// K values a strategy is run at: the sweep, or just 1 for single-sample
    /// strategies.
    pub fn ks_for(&self, strategy: Strategy) -> Vec<usize> {
        if strategy.is_single_sample() {
            vec![1]
        } else {
            let mut ks = self.k_sweep.clone();
            ks.sort_unstable();
            ks.dedup();
            ks
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tasks_all_or_list() {
        let c = BenchConfig::from_json(r#"{"tasks": "all", "output_dir": "x"}"#).unwrap();
        assert_eq!(c.tasks, TaskSelection::All);
        let c = BenchConfig::from_json(r#"{"tasks": [0, 3]}"#).unwrap();
        assert_eq!(c.tasks.indices(SuiteTag::Id), vec![0, 3]);
        assert!(BenchConfig::from_json(r#"{"tasks": "some"}"#).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(BenchConfig::from_json(r#"{"trials": 5}"#).is_err());
        assert!(BenchConfig::from_json(r#"{"policy": {"p_wrongg": 0.1}}"#).is_err());
        assert!(BenchConfig::from_json(r#"{"steer": [{"strategy": "seal", "kk": 2}]}"#).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(BenchConfig::from_json(r#"{"trials_per_task": 0}"#).is_err());
        assert!(BenchConfig::from_json(r#"{"k_sweep": []}"#).is_err());
        assert!(BenchConfig::from_json(r#"{"tasks": [10]}"#).is_err());
        assert!(BenchConfig::from_json(r#"{"steer": [{"strategy": "seal"}, {"strategy": "seal"}]}"#).is_err());
    }

    #[test]
    fn default_round_trips() {
        let c = BenchConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(BenchConfig::from_json(&text).unwrap(), c);
    }
}
