//! Simulated plan-then-act policy with configurable faithfulness defects,
//! plus a vanilla policy that acts straight from the instruction.
//!
//! The think branch writes a [`PlanRecord`]; the act branch opens a segment,
//! possibly pursuing a subgoal other than the one the plan names, and emits
//! expert actions (with per-step noise) until the pursued subgoal holds or the
//! segment cap is hit, at which point it emits `Think`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taskworld::{
    alternatives, eval_predicate, expert_action, parse_plan_sentence, plan_sentence,
    satisfied_prefix, ActionToken, Subgoal, SuiteTag, TaskSpec, WorldError, WorldState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("invalid policy config: {0}")]
    Config(String),
    #[error("malformed plan text: {0}")]
    PlanFormat(String),
}

/// Multipliers applied to defect rates on one suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corruption {
    /// Scales the plan-error probability.
    pub plan: f64,
    /// Scales the act-side probabilities (wrong subgoal, per-step noise).
    pub act: f64,
    /// Scales the vanilla policy's grounding-error probability.
    pub vanilla: f64,
}

impl Corruption {
    pub const NONE: Corruption = Corruption { plan: 1.0, act: 1.0, vanilla: 1.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub p_plan_err: f64,
    pub p_wrong: f64,
    pub p_noise: f64,
    pub h_max: u32,
    pub t_act: f64,
    pub corruption: BTreeMap<SuiteTag, Corruption>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let corruption = [
            (SuiteTag::Id, Corruption::NONE),
            (SuiteTag::LangRephrase, Corruption { plan: 1.0, act: 1.1, vanilla: 2.0 }),
            (SuiteTag::LangObjectProperty, Corruption { plan: 1.0, act: 1.2, vanilla: 1.8 }),
            (SuiteTag::VisualScene, Corruption { plan: 1.0, act: 1.3, vanilla: 1.5 }),
            (SuiteTag::VisualViewpoint, Corruption { plan: 1.0, act: 2.0, vanilla: 2.5 }),
            (SuiteTag::Compose, Corruption { plan: 1.0, act: 1.5, vanilla: 2.0 }),
        ]
        .into_iter()
        .collect();
        Self {
            p_plan_err: 0.0,
            p_wrong: 0.3,
            p_noise: 0.03,
            h_max: 24,
            t_act: 1.0,
            corruption,
        }
    }
}

impl PolicyConfig {
    /// Defect-free policy: follows the ground-truth plan with expert actions.
    pub fn zero_defect() -> Self {
        Self { p_plan_err: 0.0, p_wrong: 0.0, p_noise: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(PolicyError::Config(format!("{name} = {v} is not a probability")))
            }
        };
        prob("p_plan_err", self.p_plan_err)?;
        prob("p_wrong", self.p_wrong)?;
        prob("p_noise", self.p_noise)?;
        if self.h_max < 1 {
            return Err(PolicyError::Config("h_max must be at least 1".into()));
        }
        if !(self.t_act >= 0.0) {
            return Err(PolicyError::Config(format!("t_act = {} is negative", self.t_act)));
        }
        for (suite, c) in &self.corruption {
            if !(c.plan >= 0.0 && c.act >= 0.0 && c.vanilla >= 0.0) {
                return Err(PolicyError::Config(format!("negative corruption on {suite}")));
            }
        }
        Ok(())
    }

    pub fn corruption_for(&self, suite: SuiteTag) -> Corruption {
        self.corruption.get(&suite).copied().unwrap_or(Corruption::NONE)
    }

    /// Defect rates after applying temperature and the suite's corruption.
    pub fn effective(&self, suite: SuiteTag) -> Rates {
        let c = self.corruption_for(suite);
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        Rates {
            p_plan_err: clamp(self.p_plan_err * c.plan),
            p_wrong: clamp(self.p_wrong * self.t_act * c.act),
            p_noise: clamp(self.p_noise * self.t_act * c.act),
            p_ground_err: clamp((self.p_plan_err + self.p_wrong) * self.t_act * c.vanilla),
            h_max: self.h_max,
        }
    }
}

/// Effective per-suite defect rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub p_plan_err: f64,
    pub p_wrong: f64,
    pub p_noise: f64,
    /// Vanilla policy: plan and act defects folded into one grounding error.
    pub p_ground_err: f64,
    pub h_max: u32,
}

/// One intermediate reasoning step in the three-field format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub plans: Vec<String>,
    pub done: Vec<String>,
    pub now: String,
    pub target: Subgoal,
    pub index: usize,
}

const PLANS: &str = "Plans: ";
const DONE: &str = "What has been done: ";
const NOW: &str = "Now I need to do: ";
const SEP: &str = "; ";
const NOTHING: &str = "nothing";

impl PlanRecord {
    /// Builds the record whose `now` is entry `done_count` of `plans`.
    pub fn new(plans: Vec<String>, done_count: usize, index: usize) -> Result<Self, PolicyError> {
        let now = plans
            .get(done_count)
            .cloned()
            .ok_or_else(|| PolicyError::PlanFormat("done covers every plan".into()))?;
        let target = parse_plan_sentence(&now)?;
        Ok(Self { done: plans[..done_count].to_vec(), plans, now, target, index })
    }

    pub fn render(&self) -> String {
        let done = if self.done.is_empty() {
            NOTHING.to_string()
        } else {
            self.done.join(SEP)
        };
        format!(
            "{PLANS}{}\n{DONE}{}\n{NOW}{}",
            self.plans.join(SEP),
            done,
            self.now
        )
    }

    /// Structural invariants: `done` is a strict prefix of `plans`, `now`
    /// follows it, and `target` is what `now` says.
    pub fn check(&self) -> Result<(), PolicyError> {
        let n = self.done.len();
        if n >= self.plans.len() || self.plans[..n] != self.done[..] {
            return Err(PolicyError::PlanFormat("done is not a strict prefix of plans".into()));
        }
        if self.plans[n] != self.now {
            return Err(PolicyError::PlanFormat("now is not the plan after done".into()));
        }
        if parse_plan_sentence(&self.now)? != self.target {
            return Err(PolicyError::PlanFormat("target does not match now".into()));
        }
        Ok(())
    }
}

/// Parses rendered plan text back into (plans, done, now). Any deviation from
/// the three-line template is an error.
pub fn parse_plan_text(text: &str) -> Result<(Vec<String>, Vec<String>, String), PolicyError> {
    let bad = |m: &str| PolicyError::PlanFormat(m.to_string());
    let lines: Vec<&str> = text.split('\n').collect();
    let [l1, l2, l3] = lines[..] else {
        return Err(bad("expected exactly three lines"));
    };
    let plans = l1.strip_prefix(PLANS).ok_or_else(|| bad("line 1 must start with 'Plans: '"))?;
    let done = l2
        .strip_prefix(DONE)
        .ok_or_else(|| bad("line 2 must start with 'What has been done: '"))?;
    let now = l3
        .strip_prefix(NOW)
        .ok_or_else(|| bad("line 3 must start with 'Now I need to do: '"))?;
    let split = |s: &str| -> Vec<String> { s.split(SEP).map(str::to_string).collect() };
    let plans = split(plans);
    let done = if done == NOTHING { Vec::new() } else { split(done) };
    if plans.iter().chain(done.iter()).any(|p| p.is_empty()) || now.is_empty() {
        return Err(bad("empty plan sentence"));
    }
    Ok((plans, done, now.to_string()))
}

/// Autoregressive context of one candidate's act branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentState {
    pub intended: Subgoal,
    pub steps_taken: u32,
}

fn pick<R: Rng>(rng: &mut R, options: &[Subgoal]) -> Subgoal {
    options[rng.gen_range(0..options.len())]
}

fn random_physical<R: Rng>(rng: &mut R) -> ActionToken {
    ActionToken::PHYSICAL[rng.gen_range(0..ActionToken::PHYSICAL.len())]
}

/// Reasoning policy bound to one suite's effective rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReasoningPolicy {
    pub rates: Rates,
}

impl ReasoningPolicy {
    pub fn new(cfg: &PolicyConfig, suite: SuiteTag) -> Self {
        Self { rates: cfg.effective(suite) }
    }

    /// Think branch. `Ok(None)` means every subgoal holds and the episode is over.
    pub fn generate_plan<R: Rng>(
        &self,
        state: &WorldState,
        last: Option<&PlanRecord>,
        task: &TaskSpec,
        rng: &mut R,
    ) -> Result<Option<PlanRecord>, PolicyError> {
        let done = satisfied_prefix(state, &task.subgoals)?;
        if done == task.subgoals.len() {
            return Ok(None);
        }
        let truth = task.subgoals[done];
        let mut target = truth;
        if rng.gen::<f64>() < self.rates.p_plan_err {
            let mut options = Vec::new();
            for g in &task.subgoals[done + 1..] {
                if !eval_predicate(state, g)? && !options.contains(g) {
                    options.push(*g);
                }
            }
            for g in alternatives(state, &truth) {
                if !options.contains(&g) {
                    options.push(g);
                }
            }
            options.retain(|g| *g != truth);
            if !options.is_empty() {
                target = pick(rng, &options);
            }
        }
        let mut plans = task
            .subgoals
            .iter()
            .map(plan_sentence)
            .collect::<Result<Vec<_>, _>>()?;
        plans[done] = plan_sentence(&target)?;
        let index = last.map_or(0, |p| p.index + 1);
        Ok(Some(PlanRecord::new(plans, done, index)?))
    }

    /// Starts the act branch for `plan`.
    pub fn open_segment<R: Rng>(&self, plan: &PlanRecord, state: &WorldState, rng: &mut R) -> SegmentState {
        let mut intended = plan.target;
        if rng.gen::<f64>() < self.rates.p_wrong {
            let alts = alternatives(state, &plan.target);
            if !alts.is_empty() {
                intended = pick(rng, &alts);
            }
        }
        SegmentState { intended, steps_taken: 0 }
    }

    /// Next act-branch token; `Think` ends the segment.
    pub fn next_token<R: Rng>(&self, state: &WorldState, seg: &mut SegmentState, rng: &mut R) -> ActionToken {
        let reached = eval_predicate(state, &seg.intended).unwrap_or(true);
        if reached || seg.steps_taken >= self.rates.h_max {
            return ActionToken::Think;
        }
        seg.steps_taken += 1;
        if rng.gen::<f64>() < self.rates.p_noise {
            return random_physical(rng);
        }
        match expert_action(state, &seg.intended) {
            Ok(ActionToken::Think) | Err(_) => random_physical(rng),
            Ok(a) => a,
        }
    }
}

/// Grounding state of the vanilla policy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VanillaState {
    pub intended: Option<Subgoal>,
    pub steps: u32,
}

/// Instruction-conditioned policy without intermediate reasoning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanillaPolicy {
    pub rates: Rates,
}

impl VanillaPolicy {
    pub fn new(cfg: &PolicyConfig, suite: SuiteTag) -> Self {
        Self { rates: cfg.effective(suite) }
    }

    /// Next action; `Think` once every task subgoal holds.
    pub fn vanilla_action<R: Rng>(
        &self,
        state: &WorldState,
        task: &TaskSpec,
        vs: &mut VanillaState,
        rng: &mut R,
    ) -> Result<ActionToken, PolicyError> {
        let done = satisfied_prefix(state, &task.subgoals)?;
        if done == task.subgoals.len() {
            return Ok(ActionToken::Think);
        }
        let stale = match vs.intended {
            None => true,
            Some(g) => eval_predicate(state, &g)? || vs.steps >= self.rates.h_max,
        };
        if stale {
            let truth = task.subgoals[done];
            let mut g = truth;
            if rng.gen::<f64>() < self.rates.p_ground_err {
                let alts = alternatives(state, &truth);
                if !alts.is_empty() {
                    g = pick(rng, &alts);
                }
            }
            vs.intended = Some(g);
            vs.steps = 0;
        }
        vs.steps += 1;
        let intended = vs.intended.expect("grounded above");
        if rng.gen::<f64>() < self.rates.p_noise {
            return Ok(random_physical(rng));
        }
        Ok(match expert_action(state, &intended) {
            Ok(ActionToken::Think) | Err(_) => random_physical(rng),
            Ok(a) => a,
        })
    }
}
