//! Reasoning-annotated demonstrations: expert trajectories segmented at
//! subgoal-completion boundaries, each segment labelled with a three-field
//! plan record.
//!
//! Datasets are JSON Lines, one episode per line, with keys `task`, `frames`
//! and `segments`. A frame is `{state, action}`; the state after the last
//! frame is `step(last.state, last.action)`. A segment is
//! `{plan, text, start, end}` with `end` exclusive, where `text` is the
//! rendered plan.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{parse_plan_text, PlanRecord, PolicyError};
use crate::rng::{purpose, stream};
use crate::taskworld::{
    all_satisfied, eval_predicate, expert_action_jittered, plan_sentence, sample_scene, step,
    suite_size, ActionToken, SuiteTag, TaskSpec, WorldError, WorldState,
};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("expert did not finish {task:?} within {limit} steps")]
    Unsolved { task: String, limit: usize },
    #[error("subgoal {index} ({goal}) never becomes true in the trajectory")]
    Incomplete { index: usize, goal: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub state: WorldState,
    pub action: ActionToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task: TaskSpec,
    /// Physical actions only, each with the state it was taken from.
    pub frames: Vec<Frame>,
}

impl Trajectory {
    /// State after executing frame `i`'s action.
    pub fn state_after(&self, i: usize) -> WorldState {
        step(&self.frames[i].state, self.frames[i].action)
    }

    /// State reached after the whole trajectory.
    pub fn terminal_state(&self) -> Option<WorldState> {
        self.frames.len().checked_sub(1).map(|i| self.state_after(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSegment {
    pub plan: PlanRecord,
    /// `plan` rendered in the three-field template.
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Expert demonstration of `task` from `state`. `jitter` randomizes ties
/// between equally short moves (0 keeps the fixed axis order).
pub fn demo_from(
    state: WorldState,
    task: &TaskSpec,
    seed: u64,
    jitter: f64,
) -> Result<Trajectory, AnnotateError> {
    let limit = usize::from(state.grid_width) * usize::from(state.grid_height) * 8;
    let mut rng = stream(&[seed, purpose::DEMO]);
    let mut frames = Vec::new();
    let mut s = state;
    for goal in &task.subgoals {
        let mut used = 0;
        loop {
            let a = expert_action_jittered(&s, goal, &mut rng, jitter)?;
            if a == ActionToken::Think {
                break;
            }
            used += 1;
            if used > limit {
                return Err(AnnotateError::Unsolved { task: task.instruction.clone(), limit });
            }
            let next = step(&s, a);
            frames.push(Frame { state: s, action: a });
            s = next;
        }
    }
    if !all_satisfied(&s, &task.subgoals)? {
        return Err(AnnotateError::Unsolved { task: task.instruction.clone(), limit });
    }
    Ok(Trajectory { task: task.clone(), frames })
}

/// Expert demonstration for one suite task, deterministic in `seed`.
pub fn generate_demo(suite: SuiteTag, task_index: usize, seed: u64) -> Result<Trajectory, AnnotateError> {
    let (state, task) = sample_scene(suite, task_index, seed)?;
    demo_from(state, &task, seed, 0.0)
}

/// Cuts a successful trajectory at the first frame after which each subgoal
/// holds, in task order.
pub fn segment_trajectory(traj: &Trajectory) -> Result<Vec<AnnotatedSegment>, AnnotateError> {
    let goals = &traj.task.subgoals;
    let plans = goals.iter().map(plan_sentence).collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(goals.len());
    let mut start = 0;
    for (j, goal) in goals.iter().enumerate() {
        let mut end = None;
        for i in start..traj.frames.len() {
            if eval_predicate(&traj.state_after(i), goal)? {
                end = Some(i + 1);
                break;
            }
        }
        let end = end.ok_or_else(|| AnnotateError::Incomplete { index: j, goal: goal.to_string() })?;
        let plan = PlanRecord::new(plans.clone(), j, j)?;
        out.push(AnnotatedSegment { text: plan.render(), plan, start, end });
        start = end;
    }
    if start != traj.frames.len() {
        // Trailing frames belong to the last subgoal.
        if let Some(last) = out.last_mut() {
            last.end = traj.frames.len();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Transition,
    Coverage,
    Format,
    TerminalPredicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub episode: usize,
    pub segment: Option<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub episodes: usize,
    pub segments: usize,
    pub passed_segments: usize,
    pub failed_segments: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn template() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\APlans: [^\n]+\nWhat has been done: [^\n]+\nNow I need to do: [^\n]+\z").unwrap()
    })
}

fn format_problem(seg: &AnnotatedSegment) -> Option<String> {
    if !template().is_match(&seg.text) {
        return Some("text does not match the three-field template".into());
    }
    let (plans, done, now) = match parse_plan_text(&seg.text) {
        Ok(v) => v,
        Err(e) => return Some(e.to_string()),
    };
    if plans != seg.plan.plans || done != seg.plan.done || now != seg.plan.now {
        return Some("text disagrees with the plan record".into());
    }
    if seg.plan.render() != seg.text {
        return Some("text is not the byte-exact rendering of the plan".into());
    }
    seg.plan.check().err().map(|e| e.to_string())
}

/// Reports every coverage, format, transition and terminal-predicate
/// violation. Never fails.
pub fn validate_annotations(dataset: &[(Trajectory, Vec<AnnotatedSegment>)]) -> ValidationReport {
    let mut report = ValidationReport { episodes: dataset.len(), ..Default::default() };
    for (ep, (traj, segs)) in dataset.iter().enumerate() {
        let mut push = |segment, kind, detail: String| {
            report.violations.push(Violation { episode: ep, segment, kind, detail });
        };
        for i in 1..traj.frames.len() {
            if traj.state_after(i - 1) != traj.frames[i].state {
                push(None, ViolationKind::Transition, format!("frame {i} does not follow frame {}", i - 1));
            }
        }
        let n = traj.frames.len();
        let mut cursor = 0;
        for (j, seg) in segs.iter().enumerate() {
            if seg.start != cursor || seg.end <= seg.start || seg.end > n {
                push(
                    Some(j),
                    ViolationKind::Coverage,
                    format!("segment [{}, {}) after cursor {cursor} of {n}", seg.start, seg.end),
                );
            }
            cursor = seg.end;
        }
        if cursor != n || segs.is_empty() {
            push(None, ViolationKind::Coverage, format!("segments end at {cursor}, trajectory has {n} frames"));
        }
        for (j, seg) in segs.iter().enumerate() {
            let mut ok = true;
            if let Some(problem) = format_problem(seg) {
                push(Some(j), ViolationKind::Format, problem);
                ok = false;
            }
            let holds = seg.end >= 1
                && seg.end <= n
                && eval_predicate(&traj.state_after(seg.end - 1), &seg.plan.target).unwrap_or(false);
            if !holds {
                push(
                    Some(j),
                    ViolationKind::TerminalPredicate,
                    format!("{} does not hold after frame {}", seg.plan.target, seg.end as i64 - 1),
                );
                ok = false;
            }
            report.segments += 1;
            if ok {
                report.passed_segments += 1;
            } else {
                report.failed_segments += 1;
            }
        }
    }
    report
}

/// `episodes` demos cycling through the suite's tasks; episode `i` uses
/// task `i % size` and scene seed `seed + i`.
pub fn annotate_suite(
    suite: SuiteTag,
    episodes: usize,
    seed: u64,
) -> Result<Vec<(Trajectory, Vec<AnnotatedSegment>)>, AnnotateError> {
    let size = suite_size(suite);
    (0..episodes)
        .map(|i| {
            let traj = generate_demo(suite, i % size, seed.wrapping_add(i as u64))?;
            let segs = segment_trajectory(&traj)?;
            Ok((traj, segs))
        })
        .collect()
}

#[derive(Serialize)]
struct Line<'a> {
    task: &'a TaskSpec,
    frames: &'a [Frame],
    segments: &'a [AnnotatedSegment],
}

#[derive(Deserialize)]
struct OwnedLine {
    task: TaskSpec,
    frames: Vec<Frame>,
    segments: Vec<AnnotatedSegment>,
}

pub fn write_dataset(path: &Path, dataset: &[(Trajectory, Vec<AnnotatedSegment>)]) -> Result<(), AnnotateError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (traj, segs) in dataset {
        serde_json::to_writer(&mut w, &Line { task: &traj.task, frames: &traj.frames, segments: segs })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<(Trajectory, Vec<AnnotatedSegment>)>, AnnotateError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let line: OwnedLine = serde_json::from_str(l)?;
            Ok((Trajectory { task: line.task, frames: line.frames }, line.segments))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_subgoal_is_one_segment() {
        let traj = generate_demo(SuiteTag::Id, 5, 1).unwrap();
        let segs = segment_trajectory(&traj).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].start, segs[0].end), (0, traj.frames.len()));
    }

    #[test]
    fn two_subgoals_cut_at_first_true_frame() {
        let traj = generate_demo(SuiteTag::Id, 0, 4).unwrap();
        let segs = segment_trajectory(&traj).unwrap();
        assert_eq!(segs.len(), 2);
        let g = traj.task.subgoals[0];
        let first = (0..traj.frames.len()).find(|&i| eval_predicate(&traj.state_after(i), &g).unwrap()).unwrap();
        assert_eq!(segs[0].end, first + 1);
        assert_eq!(segs[1].start, segs[0].end);
        assert_eq!(segs[0].plan.now, "put the alphabet soup in the basket");
        assert_eq!(segs[1].plan.done, vec!["put the alphabet soup in the basket".to_string()]);
    }

    #[test]
    fn pipeline_output_is_clean_and_faults_are_flagged() {
        let mut data = annotate_suite(SuiteTag::Id, 20, 0).unwrap();
        assert!(validate_annotations(&data).is_clean());

        data[0].1[0].end -= 1;
        data[0].1[1].start -= 1;
        let r = validate_annotations(&data);
        assert!(r.violations.iter().any(|v| v.kind == ViolationKind::TerminalPredicate && v.episode == 0));

        let mut data = annotate_suite(SuiteTag::Id, 2, 0).unwrap();
        let lines: Vec<&str> = data[1].1[0].text.lines().collect();
        data[1].1[0].text = format!("{}\n{}\n{}", lines[1], lines[0], lines[2]);
        let r = validate_annotations(&data);
        assert!(r.violations.iter().any(|v| v.kind == ViolationKind::Format && v.episode == 1));
        assert_eq!(r.failed_segments, 1);
    }

    #[test]
    fn segmentation_is_idempotent_and_deterministic() {
        let a = generate_demo(SuiteTag::Compose, 8, 3).unwrap();
        assert_eq!(a, generate_demo(SuiteTag::Compose, 8, 3).unwrap());
        assert_eq!(segment_trajectory(&a).unwrap(), segment_trajectory(&a).unwrap());
    }

    #[test]
    fn dataset_round_trip() {
        let data = annotate_suite(SuiteTag::Id, 3, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        write_dataset(&p, &data).unwrap();
        assert_eq!(read_dataset(&p).unwrap(), data);
    }
}
