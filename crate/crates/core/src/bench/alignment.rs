use crate::policy::{PlanRecord, PolicyConfig, ReasoningPolicy};
use crate::rng::SegmentStreams;
use crate::rollout::{hypothesize_predict, EnvPool, RoundSpec};
use crate::steer::{seal_select, Fallback};
use crate::taskworld::{eval_predicate, sample_scene, SuiteTag};
use crate::verify::{LatencyModel, VerifierConfig};

use super::BenchError;

/// Monte Carlo estimate of the plan-outcome misalignment rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentEstimate {
    /// Fraction of segments whose final state fails the plan's target.
    pub loss: f64,
    /// Standard error of `loss`.
    pub se: f64,
    pub failures: u64,
    pub m: u64,
}

impl AlignmentEstimate {
    fn from_counts(failures: u64, m: u64) -> Self {
        let loss = failures as f64 / m as f64;
        Self { loss, se: (loss * (1.0 - loss) / m as f64).sqrt(), failures, m }
    }
}

/// Runs `m` independent single-candidate act branches for `plan` from the
/// scene's start state and counts those that miss the plan's target.
pub fn estimate_alignment_loss(
    pcfg: &PolicyConfig,
    suite: SuiteTag,
    task_index: usize,
    plan: &PlanRecord,
    m: u64,
    seed: u64,
) -> Result<AlignmentEstimate, BenchError> {
    estimate(pcfg, suite, task_index, plan, m, seed, 1, None)
}

/// Same estimator, but each segment is chosen by verified selection over `k`
/// candidates. Round `i` shares its candidate-0 stream with round `i` of the
/// unsteered estimator, so the two are paired.
pub fn estimate_alignment_loss_steered(
    pcfg: &PolicyConfig,
    suite: SuiteTag,
    task_index: usize,
    plan: &PlanRecord,
    m: u64,
    seed: u64,
    k: usize,
    vcfg: &VerifierConfig,
) -> Result<AlignmentEstimate, BenchError> {
    estimate(pcfg, suite, task_index, plan, m, seed, k, Some(vcfg))
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    pcfg: &PolicyConfig,
    suite: SuiteTag,
    task_index: usize,
    plan: &PlanRecord,
    m: u64,
    seed: u64,
    k: usize,
    vcfg: Option<&VerifierConfig>,
) -> Result<AlignmentEstimate, BenchError> {
    if m < 1 || k < 1 {
        return Err(BenchError::Config("m and k must be at least 1".into()));
    }
    pcfg.validate()?;
    let (state, _) = sample_scene(suite, task_index, seed)?;
    let policy = ReasoningPolicy::new(pcfg, suite);
    let lat = LatencyModel { verifier: vcfg.copied().unwrap_or_default(), ..LatencyModel::default() };
    let spec = RoundSpec { policy: &policy, lat: &lat, t0: 0.0, dynamics_noise: 0.0, chunk_len: None };
    let mut failures = 0;
    for i in 0..m {
        let mut pool = EnvPool::new(&state, k);
        let streams = SegmentStreams::new(seed, i);
        let cands = hypothesize_predict(&mut pool, plan, &spec, &streams)?;
        let chosen = match vcfg {
            Some(v) => seal_select(&cands, plan, &state, v, Fallback::EarliestFinished, &streams).chosen,
            None => 0,
        };
        if !eval_predicate(cands[chosen].final_state(&state), &plan.target)? {
            failures += 1;
        }
    }
    Ok(AlignmentEstimate::from_counts(failures, m))
}
