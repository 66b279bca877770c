//! Scripted shortest-path-then-manipulate demonstrator.
//!
//! The gripper moves freely over every cell, so the shortest path between two
//! cells is a Manhattan path. Among equally short first moves the expert picks
//! the first in the order E, W, N, S.

use rand::Rng;

use super::dynamics::eval_predicate;
use super::state::{ActionToken, Pos, Subgoal, WorldState};
use super::WorldError;

const AXIS_ORDER: [ActionToken; 4] = [
    ActionToken::MoveE,
    ActionToken::MoveW,
    ActionToken::MoveN,
    ActionToken::MoveS,
];

fn moves_toward(from: Pos, to: Pos) -> impl Iterator<Item = ActionToken> {
    AXIS_ORDER.into_iter().filter(move |a| match a {
        ActionToken::MoveE => to.x > from.x,
        ActionToken::MoveW => to.x < from.x,
        ActionToken::MoveN => to.y > from.y,
        ActionToken::MoveS => to.y < from.y,
        _ => false,
    })
}

fn move_toward(from: Pos, to: Pos) -> ActionToken {
    moves_toward(from, to).next().unwrap_or(ActionToken::Think)
}

/// Nearest free floor cell to `from` (row-major scan breaks ties).
fn nearest_free_floor(state: &WorldState, from: Pos) -> Option<Pos> {
    let mut best: Option<(u32, Pos)> = None;
    for y in 0..state.grid_height {
        for x in 0..state.grid_width {
            let p = Pos::new(x, y);
            if state.is_free_floor(p) {
                let d = from.manhattan(p);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, p));
                }
            }
        }
    }
    best.map(|(_, p)| p)
}

/// One expert step toward `goal`. Returns `Think` when the goal already holds.
pub fn expert_action(state: &WorldState, goal: &Subgoal) -> Result<ActionToken, WorldError> {
    plan_step(state, goal, None::<&mut rand::rngs::mock::StepRng>, 0.0)
}

/// Same controller with optional tie jitter: with probability `jitter`, a
/// uniformly random move among the equally short ones replaces the fixed
/// axis order. `jitter = 0` never touches `rng`.
pub fn expert_action_jittered<R: Rng>(
    state: &WorldState,
    goal: &Subgoal,
    rng: &mut R,
    jitter: f64,
) -> Result<ActionToken, WorldError> {
    plan_step(state, goal, Some(rng), jitter)
}

fn plan_step<R: Rng>(
    state: &WorldState,
    goal: &Subgoal,
    mut rng: Option<&mut R>,
    jitter: f64,
) -> Result<ActionToken, WorldError> {
    if eval_predicate(state, goal)? {
        return Ok(ActionToken::Think);
    }
    let here = state.gripper.pos;
    let mut go = |to: Pos| -> ActionToken {
        if jitter > 0.0 {
            if let Some(r) = rng.as_deref_mut() {
                if r.gen_bool(jitter.clamp(0.0, 1.0)) {
                    let opts: Vec<_> = moves_toward(here, to).collect();
                    if !opts.is_empty() {
                        return opts[r.gen_range(0..opts.len())];
                    }
                }
            }
        }
        move_toward(here, to)
    };
    let fixture = state
        .fixture(goal.fixture())
        .ok_or(WorldError::UnknownFixture(goal.fixture()))?;

    match *goal {
        Subgoal::Closed { .. } => {
            if here != fixture.pos {
                return Ok(go(fixture.pos));
            }
            Ok(ActionToken::Close)
        }
        Subgoal::Activated { .. } => {
            if here != fixture.pos {
                return Ok(go(fixture.pos));
            }
            Ok(ActionToken::Activate)
        }
        Subgoal::In { object, .. } | Subgoal::On { object, .. } => {
            let target = state.object(object).ok_or(WorldError::UnknownObject(object))?;
            match state.gripper.held {
                Some(h) if h == object => {
                    if state.contents(fixture.id).count() >= fixture.kind.capacity() {
                        return Err(WorldError::Unreachable(format!(
                            "{goal}: fixture {} is full",
                            fixture.name
                        )));
                    }
                    if here != fixture.pos {
                        return Ok(go(fixture.pos));
                    }
                    if fixture.is_closed() {
                        return Ok(ActionToken::Open);
                    }
                    Ok(ActionToken::Release)
                }
                Some(_) => {
                    // Holding something else: put it down on free floor first.
                    if state.is_free_floor(here) {
                        return Ok(ActionToken::Release);
                    }
                    match nearest_free_floor(state, here) {
                        Some(p) => Ok(go(p)),
                        None => Err(WorldError::Unreachable(format!(
                            "{goal}: no free cell to set down held object"
                        ))),
                    }
                }
                None => {
                    if here != target.pos {
                        return Ok(go(target.pos));
                    }
                    if let Some(c) = target.container {
                        if state.fixture(c).is_some_and(|f| f.is_closed()) {
                            return Ok(ActionToken::Open);
                        }
                    }
                    Ok(ActionToken::Grasp)
                }
            }
        }
    }
}
