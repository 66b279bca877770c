use std::collections::{BTreeSet, VecDeque};

use rand::Rng;

use crate::clock::{EventQueue, Millis};
use crate::policy::PlanRecord;
use crate::rng::SegmentStreams;
use crate::rollout::CandidateRollout;
use crate::taskworld::{eval_predicate, Pos, Subgoal, TaskSpec, WorldState};
use crate::verify::{draw_service_time, verdict_noisy, verdict_oracle, Verdict, VerifierConfig};

use super::{Fallback, SteerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Position of the chosen candidate in the slice passed to the selector.
    pub chosen: usize,
    pub decided_at: Millis,
    /// Verdicts that arrived before the decision, in arrival order.
    pub verdicts_seen: Vec<Verdict>,
    pub fallback_used: bool,
}

// Completions sort ahead of generation finishes at the same instant so a
// freed slot is visible to the candidate that finishes then.
const DONE: u8 = 0;
const FINISH: u8 = 1;

enum Event {
    Finish(usize),
    Done { pos: usize, accept: bool, issued: Millis, started: Millis },
}

/// Early-exit verified selection.
///
/// Each candidate joins a FIFO verifier queue at its `gen_finish` (ties by
/// index); at most `pool_limit` queries run at once. The first accepting
/// verdict to arrive wins and everything still pending is dropped. If all
/// verdicts reject, `fallback` picks the candidate and the decision time is
/// the arrival of the last rejection.
pub fn seal_select(
    cands: &[CandidateRollout],
    plan: &PlanRecord,
    base: &WorldState,
    vcfg: &VerifierConfig,
    fallback: Fallback,
    streams: &SegmentStreams,
) -> Selection {
    assert!(!cands.is_empty(), "seal_select needs at least one candidate");
    let start = cands.iter().map(|c| c.gen_finish).fold(f64::INFINITY, f64::min);
    let mut q = EventQueue::new(start);
    for (pos, c) in cands.iter().enumerate() {
        q.schedule(c.gen_finish, FINISH, c.index, Event::Finish(pos));
    }
    let mut waiting = VecDeque::new();
    let mut in_flight = 0usize;
    let mut verdicts = Vec::new();
    while let Some((now, ev)) = q.pop() {
        match ev {
            Event::Finish(pos) => waiting.push_back(pos),
            Event::Done { pos, accept, issued, started } => {
                in_flight -= 1;
                verdicts.push(Verdict {
                    candidate: cands[pos].index,
                    accept,
                    issued_at: issued,
                    started_at: started,
                    arrived_at: now,
                });
                if accept {
                    return Selection { chosen: pos, decided_at: now, verdicts_seen: verdicts, fallback_used: false };
                }
            }
        }
        while in_flight < vcfg.pool_limit {
            let Some(pos) = waiting.pop_front() else { break };
            let c = &cands[pos];
            let mut rng = streams.verify(c.index);
            let service = draw_service_time(vcfg, &mut rng);
            let truth = verdict_oracle(base, c.final_state(base), plan);
            let accept = verdict_noisy(truth, vcfg, &mut rng);
            q.schedule(
                now + service,
                DONE,
                c.index,
                Event::Done { pos, accept, issued: c.gen_finish, started: now },
            );
            in_flight += 1;
        }
    }
    let chosen = match fallback {
        Fallback::EarliestFinished => (0..cands.len())
            .min_by(|&a, &b| {
                cands[a]
                    .gen_finish
                    .total_cmp(&cands[b].gen_finish)
                    .then(cands[a].index.cmp(&cands[b].index))
            })
            .unwrap(),
        Fallback::Longest => (0..cands.len())
            .min_by(|&a, &b| {
                cands[b]
                    .segment_len
                    .cmp(&cands[a].segment_len)
                    .then(cands[a].index.cmp(&cands[b].index))
            })
            .unwrap(),
        Fallback::Random => streams.fallback().gen_range(0..cands.len()),
    };
    Selection { chosen, decided_at: q.now(), verdicts_seen: verdicts, fallback_used: true }
}

fn target_of(state: &WorldState, task: &TaskSpec) -> Option<Subgoal> {
    task.subgoals
        .iter()
        .find(|g| !eval_predicate(state, g).unwrap_or(false))
        .copied()
}

/// Progress heuristic standing in for a learned critic.
///
/// `satisfied - distance + miscalibration * spurious`, where `distance` is the
/// gripper's remaining Manhattan travel to the first unmet subgoal scaled into
/// [0, 1), and `spurious` counts non-task objects resting in task fixtures.
pub fn heuristic_value(state: &WorldState, task: &TaskSpec, cfg: &SteerConfig) -> f64 {
    let satisfied = task
        .subgoals
        .iter()
        .filter(|g| eval_predicate(state, g).unwrap_or(false))
        .count() as f64;
    let g = state.gripper.pos;
    let fixture_pos = |goal: &Subgoal| state.fixture(goal.fixture()).map(|f| f.pos);
    let travel = match target_of(state, task) {
        None => 0,
        Some(goal) => {
            let f: Option<Pos> = fixture_pos(&goal);
            match (goal.object(), f) {
                (Some(o), Some(f)) if state.gripper.held == Some(o) => g.manhattan(f),
                (Some(o), Some(f)) => match state.object(o) {
                    Some(obj) => g.manhattan(obj.pos) + obj.pos.manhattan(f),
                    None => 0,
                },
                (None, Some(f)) => g.manhattan(f),
                _ => 0,
            }
        }
    };
    let span = 2 * (u32::from(state.grid_width) + u32::from(state.grid_height) - 2) + 1;
    let distance = f64::from(travel) / f64::from(span);

    let task_fixtures: BTreeSet<_> = task.subgoals.iter().map(Subgoal::fixture).collect();
    let task_placements: BTreeSet<_> = task
        .subgoals
        .iter()
        .filter_map(|s| s.object().map(|o| (o, s.fixture())))
        .collect();
    let spurious = state
        .objects
        .iter()
        .filter(|o| {
            o.container
                .is_some_and(|f| task_fixtures.contains(&f) && !task_placements.contains(&(o.id, f)))
        })
        .count() as f64;

    satisfied - distance + cfg.miscalibration(task.suite_tag) * spurious
}

/// Picks the candidate whose predicted final state scores highest (ties to the
/// lowest index). It must wait for every candidate to finish and never looks
/// at the plan.
pub fn value_select(
    cands: &[CandidateRollout],
    base: &WorldState,
    task: &TaskSpec,
    cfg: &SteerConfig,
) -> Selection {
    assert!(!cands.is_empty(), "value_select needs at least one candidate");
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (pos, c) in cands.iter().enumerate() {
        let score = heuristic_value(c.final_state(base), task, cfg);
        if score > best_score {
            best = pos;
            best_score = score;
        }
    }
    let decided_at = cands.iter().map(|c| c.gen_finish).fold(f64::NEG_INFINITY, f64::max);
    Selection { chosen: best, decided_at, verdicts_seen: Vec::new(), fallback_used: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{PolicyConfig, ReasoningPolicy, SegmentState};
    use crate::rng::stream;
    use crate::taskworld::{sample_scene, state_hash, step, ActionToken, SuiteTag};
    use crate::verify::ServiceTime;

    fn fake(index: usize, gen_finish: f64, trace: Vec<WorldState>, base: &WorldState) -> CandidateRollout {
        CandidateRollout {
            index,
            tokens: vec![ActionToken::Think],
            segment_len: trace.len(),
            trace,
            gen_finish,
            base_hash: state_hash(base),
            seg: SegmentState { intended: Subgoal::Closed { fixture: crate::taskworld::FixtureId(104) }, steps_taken: 0 },
        }
    }

    fn scene_with_plan() -> (WorldState, TaskSpec, PlanRecord) {
        let (s, t) = sample_scene(SuiteTag::Id, 0, 7).unwrap();
        let p = ReasoningPolicy::new(&PolicyConfig::zero_defect(), SuiteTag::Id);
        let plan = p.generate_plan(&s, None, &t, &mut stream(&[0])).unwrap().unwrap();
        (s, t, plan)
    }

    fn satisfied(s: &WorldState, g: Subgoal) -> WorldState {
        let mut s = s.clone();
        let f = s.fixture(g.fixture()).unwrap().pos;
        let o = s.objects.iter_mut().find(|o| Some(o.id) == g.object()).unwrap();
        o.pos = f;
        o.container = Some(g.fixture());
        s
    }

    fn constant(ms: f64) -> VerifierConfig {
        VerifierConfig { service_time: ServiceTime::Constant { ms }, ..VerifierConfig::oracle() }
    }

    #[test]
    fn aligned_candidate_wins_regardless_of_index() {
        let (s, _, plan) = scene_with_plan();
        let good = satisfied(&s, plan.target);
        let bad = step(&s, ActionToken::MoveE);
        for aligned in 0..3 {
            let cands: Vec<_> = (0..3)
                .map(|i| fake(i, 100.0 * (i + 1) as f64, vec![if i == aligned { good.clone() } else { bad.clone() }], &s))
                .collect();
            let sel = seal_select(&cands, &plan, &s, &constant(50.0), Fallback::EarliestFinished, &SegmentStreams::new(0, 0));
            assert_eq!(sel.chosen, aligned);
            assert!(!sel.fallback_used);
        }
    }

    #[test]
    fn reject_all_uses_fallback() {
        let (s, _, plan) = scene_with_plan();
        let good = satisfied(&s, plan.target);
        let cands: Vec<_> = (0..3).map(|i| fake(i, 10.0 * (3 - i) as f64, vec![good.clone()], &s)).collect();
        let cfg = VerifierConfig { beta: 1.0, ..constant(5.0) };
        let sel = seal_select(&cands, &plan, &s, &cfg, Fallback::EarliestFinished, &SegmentStreams::new(0, 0));
        assert!(sel.fallback_used);
        assert_eq!(sel.chosen, 2);
        assert_eq!(sel.verdicts_seen.len(), 3);
        assert_eq!(sel.decided_at, 35.0);
    }

    #[test]
    fn hand_computed_schedule_with_one_slot() {
        // Finishes at 10, 20, 30 (index 0, 1, 2); service 100 with one slot.
        // Index 0 rejects at 110, index 1 accepts at 210, index 2 never runs.
        let (s, _, plan) = scene_with_plan();
        let good = satisfied(&s, plan.target);
        let traces = [s.clone(), good.clone(), good];
        let cands: Vec<_> = (0..3).map(|i| fake(i, 10.0 * (i + 1) as f64, vec![traces[i].clone()], &s)).collect();
        let cfg = VerifierConfig { pool_limit: 1, ..constant(100.0) };
        let sel = seal_select(&cands, &plan, &s, &cfg, Fallback::EarliestFinished, &SegmentStreams::new(0, 0));
        assert_eq!(sel.chosen, 1);
        assert_eq!(sel.decided_at, 210.0);
        assert_eq!(sel.verdicts_seen.len(), 2);
        assert_eq!(sel.verdicts_seen[1].started_at, 110.0);
        assert_eq!(sel.verdicts_seen[1].issued_at, 20.0);
    }

    #[test]
    fn completed_subgoal_scores_higher() {
        let (s, t, plan) = scene_with_plan();
        let cfg = SteerConfig::default();
        let done = satisfied(&s, plan.target);
        assert!(heuristic_value(&done, &t, &cfg) > heuristic_value(&s, &t, &cfg));
        let cands = vec![fake(0, 1.0, vec![s.clone()], &s), fake(1, 2.0, vec![done], &s)];
        let sel = value_select(&cands, &s, &t, &cfg);
        assert_eq!(sel.chosen, 1);
        assert_eq!(sel.decided_at, 2.0);
    }

    #[test]
    fn miscalibrated_compose_prefers_wrong_object() {
        let (s, t) = sample_scene(SuiteTag::Compose, 0, 7).unwrap();
        let cfg = SteerConfig::default();
        assert!(cfg.miscalibration(SuiteTag::Compose) > 1.0);
        let right = satisfied(&s, t.subgoals[0]);
        let basket = t.subgoals[0].fixture();
        let wrong_obj = crate::taskworld::alternatives(&s, &t.subgoals[0])[0];
        assert_eq!(wrong_obj.fixture(), basket);
        let wrong = satisfied(&s, wrong_obj);
        assert!(heuristic_value(&wrong, &t, &cfg) > heuristic_value(&right, &t, &cfg));
        let calibrated = SteerConfig { value_miscalibration: Default::default(), ..cfg.clone() };
        assert!(heuristic_value(&wrong, &t, &calibrated) < heuristic_value(&right, &t, &calibrated));

        // Paired run: the critic takes the wrong placement, the verifier does not.
        let p = ReasoningPolicy::new(&PolicyConfig::zero_defect(), SuiteTag::Compose);
        let plan = p.generate_plan(&s, None, &t, &mut stream(&[0])).unwrap().unwrap();
        let cands = vec![fake(0, 10.0, vec![right], &s), fake(1, 20.0, vec![wrong], &s)];
        assert_eq!(value_select(&cands, &s, &t, &cfg).chosen, 1);
        let sel = seal_select(&cands, &plan, &s, &constant(50.0), Fallback::EarliestFinished, &SegmentStreams::new(0, 0));
        assert_eq!(sel.chosen, 0);
        assert!(!sel.fallback_used);
    }
}
