use serde::{Deserialize, Serialize};

use crate::clock::Millis;
use crate::policy::{PolicyConfig, ReasoningPolicy, VanillaPolicy, VanillaState};
use crate::rng::{purpose, stream, SegmentStreams};
use crate::rollout::{continue_predict, hypothesize_predict, replay, sync_pool, EnvPool, RoundSpec};
use crate::taskworld::{all_satisfied, eval_predicate, sample_scene, step, ActionToken, SuiteTag, WorldState};
use crate::verify::{sampling_step_cost, verdict_oracle, LatencyModel, Verdict};

use super::{seal_select, value_select, Selection, SteerConfig, SteerError, Strategy};

/// Per-episode outcome. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub suite: SuiteTag,
    pub task_index: usize,
    pub strategy: Strategy,
    pub k: usize,
    pub seed: u64,
    pub success: bool,
    pub env_steps: u64,
    pub reasoning_steps: u64,
    pub sample_ms: Millis,
    pub verify_wait_ms: Millis,
    pub amortized_overhead_ms_per_step: Millis,
    pub fallback_count: u64,
    pub misaligned_segments: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrace {
    pub index: usize,
    pub segment_len: usize,
    pub gen_finish: Millis,
    /// Ground truth: the predicted outcome satisfies the plan's target.
    pub aligned: bool,
}

/// One reasoning step of one episode, as written to the JSONL log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrace {
    pub suite: SuiteTag,
    pub task_index: usize,
    pub strategy: Strategy,
    pub k: usize,
    pub seed: u64,
    pub segment: u64,
    pub plan: String,
    pub target: String,
    pub started_at: Millis,
    pub decided_at: Millis,
    pub candidates: Vec<CandidateTrace>,
    pub verdicts: Vec<Verdict>,
    pub chosen: usize,
    pub fallback_used: bool,
    pub executed_steps: u64,
    pub executed_aligned: bool,
    pub sample_ms: Millis,
    pub verify_wait_ms: Millis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub record: TrialRecord,
    pub trace: Vec<SegmentTrace>,
}

struct Totals {
    env_steps: u64,
    reasoning_steps: u64,
    sample_ms: Millis,
    verify_wait_ms: Millis,
    fallback_count: u64,
    misaligned_segments: u64,
}

/// Plays one episode: think, hypothesize K act branches, select, execute,
/// repeat, until the plan generator reports completion or the step budget
/// runs out.
pub fn run_episode(
    suite: SuiteTag,
    task_index: usize,
    seed: u64,
    pcfg: &PolicyConfig,
    scfg: &SteerConfig,
    lat: &LatencyModel,
) -> Result<Episode, SteerError> {
    pcfg.validate()?;
    scfg.validate()?;
    lat.validate()?;
    let (state, task) = sample_scene(suite, task_index, seed)?;
    let k = scfg.effective_k();
    let budget = scfg.step_budget.unwrap_or(40 * u64::from(pcfg.h_max));
    let mut totals = Totals {
        env_steps: 0,
        reasoning_steps: 0,
        sample_ms: 0.0,
        verify_wait_ms: 0.0,
        fallback_count: 0,
        misaligned_segments: 0,
    };
    let mut trace = Vec::new();

    let final_state = if scfg.strategy == Strategy::Vanilla {
        run_vanilla(state, &task, seed, pcfg, lat, budget, &mut totals)?
    } else {
        let policy = ReasoningPolicy::new(pcfg, suite);
        let mut pool = EnvPool::new(&state, k);
        let mut real = state;
        let mut last_plan = None;
        let mut charged = 0u64;
        let mut now: Millis = 0.0;
        let mut segment = 0u64;
        loop {
            let streams = SegmentStreams::new(seed, segment);
            let Some(plan) = policy.generate_plan(&real, last_plan.as_ref(), &task, &mut streams.plan())? else {
                break;
            };
            if charged >= budget {
                break;
            }
            let spec = RoundSpec {
                policy: &policy,
                lat,
                t0: now,
                dynamics_noise: scfg.dynamics_noise,
                chunk_len: if scfg.strategy == Strategy::Value { scfg.chunk_len } else { None },
            };
            let base = real.clone();
            let mut cands = hypothesize_predict(&mut pool, &plan, &spec, &streams)?;
            let mut executed: Vec<ActionToken> = Vec::new();
            let mut cand_log = Vec::new();
            let mut verdicts = Vec::new();
            let mut fallback_used = false;
            let mut seg_sample = 0.0;
            let mut seg_wait = 0.0;
            let mut chosen_index;
            let mut chunk = 0u64;
            loop {
                let round_base = pool.base_state().clone();
                for c in &cands {
                    cand_log.push(CandidateTrace {
                        index: c.index,
                        segment_len: c.segment_len,
                        gen_finish: c.gen_finish,
                        aligned: verdict_oracle(&round_base, c.final_state(&round_base), &plan),
                    });
                }
                let sel: Selection = match scfg.strategy {
                    Strategy::Seal => seal_select(
                        &cands,
                        &plan,
                        &round_base,
                        &lat.verifier,
                        scfg.fallback,
                        &streams,
                    ),
                    Strategy::Value => value_select(&cands, &round_base, &task, scfg),
                    Strategy::None | Strategy::Vanilla => Selection {
                        chosen: 0,
                        decided_at: cands[0].gen_finish,
                        verdicts_seen: Vec::new(),
                        fallback_used: false,
                    },
                };
                let chosen = &cands[sel.chosen];
                chosen_index = chosen.index;
                if scfg.strategy == Strategy::Seal {
                    seg_sample += chosen.gen_finish - now;
                    seg_wait += sel.decided_at - chosen.gen_finish;
                } else {
                    // Without a verifier, any wait past the chosen candidate
                    // is spent on the rest of the batch.
                    seg_sample += sel.decided_at - now;
                }
                now = sel.decided_at;
                charged += chosen.segment_len.max(1) as u64;
                fallback_used |= sel.fallback_used;
                verdicts.extend(sel.verdicts_seen.iter().copied());
                executed.extend(chosen.tokens.iter().copied().filter(|t| *t != ActionToken::Think));
                if scfg.dynamics_noise > 0.0 {
                    let actual = replay(&round_base, &chosen.tokens);
                    pool.reset_to(&actual);
                } else {
                    sync_pool(&mut pool, chosen)?;
                }
                let more = !chosen.ended_with_think() && charged < budget;
                if !more {
                    break;
                }
                chunk += 1;
                let seg = chosen.seg.clone();
                let spec = RoundSpec { t0: now, ..spec };
                cands = continue_predict(&mut pool, &seg, &spec, &streams, chunk)?;
            }
            real = pool.base_state().clone();
            let aligned = eval_predicate(&real, &plan.target)?;
            let steps = executed.len() as u64;
            totals.env_steps += steps;
            totals.reasoning_steps += 1;
            totals.sample_ms += seg_sample;
            totals.verify_wait_ms += seg_wait;
            totals.fallback_count += u64::from(fallback_used);
            totals.misaligned_segments += u64::from(!aligned);
            trace.push(SegmentTrace {
                suite,
                task_index,
                strategy: scfg.strategy,
                k,
                seed,
                segment,
                plan: plan.render(),
                target: plan.target.to_string(),
                started_at: now - seg_sample - seg_wait,
                decided_at: now,
                candidates: cand_log,
                verdicts,
                chosen: chosen_index,
                fallback_used,
                executed_steps: steps,
                executed_aligned: aligned,
                sample_ms: seg_sample,
                verify_wait_ms: seg_wait,
            });
            debug_assert_eq!(replay(&base, &executed), real, "executed tokens must reproduce the real state");
            last_plan = Some(plan);
            segment += 1;
        }
        real
    };

    let success = all_satisfied(&final_state, &task.subgoals)?;
    let overhead = totals.sample_ms + totals.verify_wait_ms;
    let record = TrialRecord {
        suite,
        task_index,
        strategy: scfg.strategy,
        k,
        seed,
        success,
        env_steps: totals.env_steps,
        reasoning_steps: totals.reasoning_steps,
        sample_ms: totals.sample_ms,
        verify_wait_ms: totals.verify_wait_ms,
        amortized_overhead_ms_per_step: if totals.env_steps > 0 {
            overhead / totals.env_steps as f64
        } else {
            0.0
        },
        fallback_count: totals.fallback_count,
        misaligned_segments: totals.misaligned_segments,
    };
    Ok(Episode { record, trace })
}

fn run_vanilla(
    mut state: WorldState,
    task: &crate::taskworld::TaskSpec,
    seed: u64,
    pcfg: &PolicyConfig,
    lat: &LatencyModel,
    budget: u64,
    totals: &mut Totals,
) -> Result<WorldState, SteerError> {
    let policy = VanillaPolicy::new(pcfg, task.suite_tag);
    let cost = sampling_step_cost(1, lat)?;
    let mut vs = VanillaState::default();
    let mut rng = stream(&[seed, purpose::VANILLA]);
    while totals.env_steps < budget {
        let a = policy.vanilla_action(&state, task, &mut vs, &mut rng)?;
        if a == ActionToken::Think {
            break;
        }
        state = step(&state, a);
        totals.env_steps += 1;
        totals.sample_ms += cost;
    }
    Ok(state)
}
