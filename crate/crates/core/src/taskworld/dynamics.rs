use super::state::{ActionToken, FixtureKind, Pos, Subgoal, WorldState};
use super::WorldError;

/// Applies one action. Inapplicable actions leave the scene untouched but
/// still advance `tick`. `Think` is a control token: the state is returned
/// unchanged, tick included.
pub fn step(state: &WorldState, action: ActionToken) -> WorldState {
    let mut next = state.clone();
    if action == ActionToken::Think {
        return next;
    }
    next.tick += 1;
    let here = next.gripper.pos;
    match action {
        ActionToken::MoveN | ActionToken::MoveS | ActionToken::MoveE | ActionToken::MoveW => {
            let to = shifted(&next, here, action);
            next.gripper.pos = to;
            if let Some(h) = next.gripper.held {
                if let Some(o) = next.object_mut(h) {
                    o.pos = to;
                }
            }
        }
        ActionToken::Grasp => {
            if next.gripper.held.is_none() {
                let pick = next
                    .objects
                    .iter()
                    .filter(|o| o.pos == here)
                    .filter(|o| match o.container {
                        None => true,
                        Some(c) => !next.fixture(c).is_some_and(|f| f.is_closed()),
                    })
                    .map(|o| o.id)
                    .min();
                if let Some(id) = pick {
                    next.gripper.held = Some(id);
                    if let Some(o) = next.object_mut(id) {
                        o.container = None;
                    }
                }
            }
        }
        ActionToken::Release => {
            if let Some(h) = next.gripper.held {
                let target = match next.fixture_at(here) {
                    Some(f) => {
                        let fits = !f.is_closed() && next.contents(f.id).count() < f.kind.capacity();
                        if fits {
                            Some(Some(f.id))
                        } else {
                            None
                        }
                    }
                    None if next.loose_object_at(here).is_none() => Some(None),
                    None => None,
                };
                if let Some(container) = target {
                    next.gripper.held = None;
                    if let Some(o) = next.object_mut(h) {
                        o.container = container;
                    }
                }
            }
        }
        ActionToken::Open | ActionToken::Close => {
            let want = action == ActionToken::Open;
            if let Some(f) = next.fixtures.iter_mut().find(|f| f.pos == here) {
                if f.open == Some(!want) {
                    f.open = Some(want);
                }
            }
        }
        ActionToken::Activate => {
            if let Some(f) = next
                .fixtures
                .iter_mut()
                .find(|f| f.pos == here && f.kind == FixtureKind::Stove)
            {
                f.active = Some(true);
            }
        }
        ActionToken::Think => unreachable!(),
    }
    next
}

fn shifted(state: &WorldState, p: Pos, action: ActionToken) -> Pos {
    let (w, h) = (state.grid_width, state.grid_height);
    match action {
        ActionToken::MoveN if p.y + 1 < h => Pos::new(p.x, p.y + 1),
        ActionToken::MoveS if p.y > 0 => Pos::new(p.x, p.y - 1),
        ActionToken::MoveE if p.x + 1 < w => Pos::new(p.x + 1, p.y),
        ActionToken::MoveW if p.x > 0 => Pos::new(p.x - 1, p.y),
        _ => p,
    }
}

pub fn eval_predicate(state: &WorldState, goal: &Subgoal) -> Result<bool, WorldError> {
    let fixture = state
        .fixture(goal.fixture())
        .ok_or(WorldError::UnknownFixture(goal.fixture()))?;
    Ok(match *goal {
        Subgoal::In { object, .. } | Subgoal::On { object, .. } => {
            let o = state.object(object).ok_or(WorldError::UnknownObject(object))?;
            o.container == Some(fixture.id)
        }
        Subgoal::Closed { .. } => fixture.open == Some(false),
        Subgoal::Activated { .. } => fixture.active == Some(true),
    })
}

/// Number of leading subgoals that currently hold.
pub fn satisfied_prefix(state: &WorldState, subgoals: &[Subgoal]) -> Result<usize, WorldError> {
    for (i, g) in subgoals.iter().enumerate() {
        if !eval_predicate(state, g)? {
            return Ok(i);
        }
    }
    Ok(subgoals.len())
}

pub fn all_satisfied(state: &WorldState, subgoals: &[Subgoal]) -> Result<bool, WorldError> {
    Ok(satisfied_prefix(state, subgoals)? == subgoals.len())
}

/// Scene-feasible subgoals of the same shape as `target` but naming a
/// different object (placements) or fixture (closing, activating). Already
/// satisfied alternatives are excluded. Sorted for reproducible sampling.
pub fn alternatives(state: &WorldState, target: &Subgoal) -> Vec<Subgoal> {
    let mut out: Vec<Subgoal> = match *target {
        Subgoal::In { object, fixture } | Subgoal::On { object, fixture } => state
            .objects
            .iter()
            .filter(|o| o.id != object && o.container != Some(fixture))
            .map(|o| match target {
                Subgoal::In { .. } => Subgoal::In { object: o.id, fixture },
                _ => Subgoal::On { object: o.id, fixture },
            })
            .collect(),
        Subgoal::Closed { fixture } => state
            .fixtures
            .iter()
            .filter(|f| f.id != fixture && f.open == Some(true))
            .map(|f| Subgoal::Closed { fixture: f.id })
            .collect(),
        Subgoal::Activated { fixture } => state
            .fixtures
            .iter()
            .filter(|f| f.id != fixture && f.active == Some(false))
            .map(|f| Subgoal::Activated { fixture: f.id })
            .collect(),
    };
    out.sort();
    out
}
