//! Seeded experiment sweeps, result files, and summary statistics.
//!
//! A run writes four files into the output directory:
//!
//! * `trials.csv`: one [`TrialRecord`] per episode, header in field order.
//! * `trace.jsonl`: one [`SegmentTrace`] per reasoning step.
//! * `summary.csv`: success rate with a Wilson 95% interval per
//!   (suite, task, strategy, k), plus an `all`-tasks row per suite.
//! * `latency.csv`: per-step sampling and verification wait per (strategy, k).

mod alignment;
mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::PolicyError;
use crate::stats::{wilson_interval, StatsError};
use crate::steer::{run_episode, Episode, SteerError, Strategy};
use crate::taskworld::{SuiteTag, WorldError};
use crate::verify::VerifyError;

pub use crate::steer::{SegmentTrace, TrialRecord};
pub use alignment::{estimate_alignment_loss, estimate_alignment_loss_steered, AlignmentEstimate};
pub use config::{BenchConfig, TaskSelection};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error(transparent)]
    Steer(#[from] SteerError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Rollout(#[from] crate::rollout::RolloutError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no records")]
    Empty,
}

/// Every episode of a sweep, in (suite, task, strategy, k, seed) order.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub records: Vec<TrialRecord>,
    pub traces: Vec<SegmentTrace>,
}

fn record_key(r: &TrialRecord) -> (SuiteTag, usize, Strategy, usize, u64) {
    (r.suite, r.task_index, r.strategy, r.k, r.seed)
}

/// Runs the full cross-product in memory.
pub fn execute(cfg: &BenchConfig) -> Result<SuiteResult, BenchError> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &suite in &cfg.suites {
        for task in cfg.tasks.indices(suite) {
            for scfg in &cfg.steer {
                for k in cfg.ks_for(scfg.strategy) {
                    for trial in 0..cfg.trials_per_task {
                        jobs.push((suite, task, scfg, k, cfg.seed0.wrapping_add(trial)));
                    }
                }
            }
        }
    }
    let mut episodes: Vec<Episode> = jobs
        .par_iter()
        .map(|&(suite, task, scfg, k, seed)| {
            let scfg = crate::steer::SteerConfig { k, ..scfg.clone() };
            run_episode(suite, task, seed, &cfg.policy, &scfg, &cfg.latency)
        })
        .collect::<Result<_, _>>()?;
    episodes.sort_by(|a, b| record_key(&a.record).cmp(&record_key(&b.record)));
    let mut records = Vec::with_capacity(episodes.len());
    let mut traces = Vec::new();
    for ep in episodes {
        records.push(ep.record);
        traces.extend(ep.trace);
    }
    Ok(SuiteResult { records, traces })
}

/// Runs the sweep and writes every result file into `cfg.output_dir`.
pub fn run_suite(cfg: &BenchConfig) -> Result<SuiteResult, BenchError> {
    let result = execute(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    write_trials(&dir.join("trials.csv"), &result.records)?;
    write_traces(&dir.join("trace.jsonl"), &result.traces)?;
    write_csv(&dir.join("summary.csv"), &summarize(&result.records)?)?;
    write_csv(&dir.join("latency.csv"), &latency_breakdown(&result.records)?)?;
    Ok(result)
}

pub fn write_trials(path: &Path, records: &[TrialRecord]) -> Result<(), BenchError> {
    write_csv(path, records)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_traces(path: &Path, traces: &[SegmentTrace]) -> Result<(), BenchError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for t in traces {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn read_traces(path: &Path) -> Result<Vec<SegmentTrace>, BenchError> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()?)
}

/// One cell of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub suite: SuiteTag,
    /// Task index, or `all` for the suite-level aggregate.
    pub task: String,
    pub strategy: Strategy,
    pub k: usize,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_steps: f64,
    pub sample_ms_per_step: f64,
    pub verify_wait_ms_per_step: f64,
    pub total_ms_per_step: f64,
    pub mean_misaligned_segments: f64,
}

#[derive(Default)]
struct Acc {
    trials: u64,
    successes: u64,
    steps: u64,
    sample_ms: f64,
    wait_ms: f64,
    misaligned: u64,
}

impl Acc {
    fn add(&mut self, r: &TrialRecord) {
        self.trials += 1;
        self.successes += u64::from(r.success);
        self.steps += r.env_steps;
        self.sample_ms += r.sample_ms;
        self.wait_ms += r.verify_wait_ms;
        self.misaligned += r.misaligned_segments;
    }

    fn per_step(&self, ms: f64) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            ms / self.steps as f64
        }
    }
}

/// Success rate with Wilson 95% intervals and per-step latency, per
/// (suite, task, strategy, k) and per (suite, all, strategy, k).
pub fn summarize(records: &[TrialRecord]) -> Result<Vec<SummaryRow>, BenchError> {
    if records.is_empty() {
        return Err(BenchError::Empty);
    }
    // `None` task sorts first and stands for the suite aggregate.
    let mut cells: BTreeMap<(SuiteTag, Option<usize>, Strategy, usize), Acc> = BTreeMap::new();
    for r in records {
        cells.entry((r.suite, Some(r.task_index), r.strategy, r.k)).or_default().add(r);
        cells.entry((r.suite, None, r.strategy, r.k)).or_default().add(r);
    }
    cells
        .into_iter()
        .map(|((suite, task, strategy, k), a)| {
            let (ci_lo, ci_hi) = wilson_interval(a.successes, a.trials, 0.95)?;
            let sample = a.per_step(a.sample_ms);
            let wait = a.per_step(a.wait_ms);
            Ok(SummaryRow {
                suite,
                task: task.map_or_else(|| "all".to_string(), |t| t.to_string()),
                strategy,
                k,
                trials: a.trials,
                successes: a.successes,
                success_rate: a.successes as f64 / a.trials as f64,
                ci_lo,
                ci_hi,
                mean_steps: a.steps as f64 / a.trials as f64,
                sample_ms_per_step: sample,
                verify_wait_ms_per_step: wait,
                total_ms_per_step: sample + wait,
                mean_misaligned_segments: a.misaligned as f64 / a.trials as f64,
            })
        })
        .collect()
}

/// Per-step latency components per (strategy, k), pooled over episodes:
/// total milliseconds divided by total executed steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub strategy: Strategy,
    pub k: usize,
    pub trials: u64,
    pub env_steps: u64,
    pub sample_ms_per_step: f64,
    pub verify_wait_ms_per_step: f64,
    pub total_ms_per_step: f64,
}

pub fn latency_breakdown(records: &[TrialRecord]) -> Result<Vec<LatencyRow>, BenchError> {
    if records.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut cells: BTreeMap<(Strategy, usize), Acc> = BTreeMap::new();
    for r in records {
        cells.entry((r.strategy, r.k)).or_default().add(r);
    }
    Ok(cells
        .into_iter()
        .map(|((strategy, k), a)| {
            let sample = a.per_step(a.sample_ms);
            let wait = a.per_step(a.wait_ms);
            LatencyRow {
                strategy,
                k,
                trials: a.trials,
                env_steps: a.steps,
                sample_ms_per_step: sample,
                verify_wait_ms_per_step: wait,
                total_ms_per_step: sample + wait,
            }
        })
        .collect())
}

/// Rebuilds `summary.csv` and `latency.csv` from a trials CSV.
pub fn report(trials_csv: &Path, out_dir: &Path) -> Result<Vec<SummaryRow>, BenchError> {
    let records = read_trials(trials_csv)?;
    let summary = summarize(&records)?;
    fs::create_dir_all(out_dir)?;
    write_csv(&out_dir.join("summary.csv"), &summary)?;
    write_csv(&out_dir.join("latency.csv"), &latency_breakdown(&records)?)?;
    Ok(summary)
}

/// Outcome of one embedded consistency check.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type EpisodeKey = (SuiteTag, usize, Strategy, usize, u64);

/// Cross-checks every record against the trace log: latency accounting,
/// misaligned-segment and fallback bookkeeping, and the amortized-overhead
/// identity.
pub fn self_checks(result: &SuiteResult) -> Vec<SelfCheck> {
    let mut by_episode: BTreeMap<EpisodeKey, Vec<&SegmentTrace>> = BTreeMap::new();
    for t in &result.traces {
        by_episode.entry((t.suite, t.task_index, t.strategy, t.k, t.seed)).or_default().push(t);
    }
    let mut accounting = Vec::new();
    let mut misaligned = Vec::new();
    let mut fallbacks = Vec::new();
    let mut amortized = Vec::new();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()));
    for r in &result.records {
        let segs = by_episode.get(&record_key(r)).map(Vec::as_slice).unwrap_or(&[]);
        let key = format!("{}/{}/{}/k{}/s{}", r.suite, r.task_index, r.strategy, r.k, r.seed);
        if r.strategy != Strategy::Vanilla {
            let s: f64 = segs.iter().map(|t| t.sample_ms).sum();
            let w: f64 = segs.iter().map(|t| t.verify_wait_ms).sum();
            let end = segs.last().map_or(0.0, |t| t.decided_at);
            if !(close(s, r.sample_ms) && close(w, r.verify_wait_ms) && close(end, s + w)) {
                accounting.push(key.clone());
            }
            let steps: u64 = segs.iter().map(|t| t.executed_steps).sum();
            if steps != r.env_steps || segs.len() as u64 != r.reasoning_steps {
                accounting.push(key.clone());
            }
        }
        let mis = segs.iter().filter(|t| !t.executed_aligned).count() as u64;
        if mis != r.misaligned_segments {
            misaligned.push(key.clone());
        }
        let fb = segs.iter().filter(|t| t.fallback_used).count() as u64;
        if fb != r.fallback_count {
            fallbacks.push(key.clone());
        }
        if r.env_steps > 0 {
            let expect = (r.sample_ms + r.verify_wait_ms) / r.env_steps as f64;
            if !close(expect, r.amortized_overhead_ms_per_step) {
                amortized.push(key);
            }
        }
    }
    let mk = |name: &'static str, bad: Vec<String>| SelfCheck {
        name,
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} episodes consistent", result.records.len())
        } else {
            format!("{} inconsistent, first {}", bad.len(), bad[0])
        },
    };
    vec![
        mk("latency accounting matches trace", accounting),
        mk("misaligned segments match trace", misaligned),
        mk("fallback count matches trace", fallbacks),
        mk("amortized overhead identity", amortized),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchConfig {
        BenchConfig {
            suites: vec![SuiteTag::Id, SuiteTag::Compose],
            tasks: TaskSelection::List(vec![0, 3]),
            trials_per_task: 3,
            k_sweep: vec![1, 4],
            ..BenchConfig::default()
        }
    }

    #[test]
    fn records_are_sorted_and_complete() {
        let res = execute(&tiny()).unwrap();
        // 2 suites x 2 tasks x (seal 2 ks + value 2 ks + none 1) x 3 trials
        assert_eq!(res.records.len(), 2 * 2 * 5 * 3);
        assert!(res.records.windows(2).all(|w| record_key(&w[0]) < record_key(&w[1])));
        assert!(self_checks(&res).iter().all(|c| c.passed));
    }

    #[test]
    fn summary_has_aggregate_rows() {
        let res = execute(&tiny()).unwrap();
        let rows = summarize(&res.records).unwrap();
        let agg: Vec<_> = rows.iter().filter(|r| r.task == "all").collect();
        assert_eq!(agg.len(), 2 * 5);
        assert!(agg.iter().all(|r| r.trials == 6 && r.ci_lo <= r.success_rate && r.success_rate <= r.ci_hi));
    }

    #[test]
    fn trials_csv_round_trip() {
        let res = execute(&tiny()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trials(&p, &res.records).unwrap();
        assert_eq!(read_trials(&p).unwrap(), res.records);
        let header = fs::read_to_string(&p).unwrap().lines().next().unwrap().to_string();
        assert_eq!(
            header,
            "suite,task_index,strategy,k,seed,success,env_steps,reasoning_steps,sample_ms,\
             verify_wait_ms,amortized_overhead_ms_per_step,fallback_count,misaligned_segments"
        );
    }

    #[test]
    fn tampered_record_fails_self_check() {
        let mut res = execute(&tiny()).unwrap();
        let i = res.records.iter().position(|r| r.strategy == Strategy::Seal).unwrap();
        res.records[i].misaligned_segments += 1;
        res.records[i].sample_ms += 1.0;
        let checks = self_checks(&res);
        assert!(!checks[0].passed);
        assert!(!checks[1].passed);
    }
}
