//! Benchmark suites: ten base tasks, four out-of-distribution variants of
//! each, and a composition suite recombining trained subgoals.

use rand::seq::SliceRandom;
use rand::Rng;

use super::catalog::{fixture_by_key, object_by_key};
use super::grammar::{render, Surface};
use super::state::{
    Fixture, FixtureKind, Gripper, Object, Pos, Subgoal, SuiteTag, TaskSpec, WorldState,
};
use super::WorldError;
use crate::rng::{purpose, stream};

pub const GRID: u16 = 6;

/// Scene layouts shared by several tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Basket,
    Stove,
    Drawer,
    Plates,
    Caddy,
    Microwave,
}

impl Layout {
    fn code(self) -> u64 {
        self as u64
    }

    /// (fixture key, cell)
    fn fixtures(self) -> &'static [(&'static str, (u16, u16))] {
        match self {
            Layout::Basket => &[("basket", (4, 4))],
            Layout::Stove => &[("stove", (4, 4))],
            Layout::Drawer => &[("drawer", (5, 2))],
            Layout::Plates => &[("left_plate", (1, 5)), ("right_plate", (4, 5))],
            Layout::Caddy => &[("caddy", (5, 4))],
            Layout::Microwave => &[("microwave", (5, 5))],
        }
    }

    fn objects(self) -> &'static [&'static str] {
        match self {
            Layout::Basket => &["soup", "sauce", "cheese", "butter", "juice", "milk", "ketchup"],
            Layout::Stove => &["moka", "red_mug", "pudding"],
            Layout::Drawer => &["bowl", "wine", "red_mug"],
            Layout::Plates => &["white_mug", "yw_mug", "red_mug", "pudding"],
            Layout::Caddy => &["book", "juice", "milk"],
            Layout::Microwave => &["yw_mug", "white_mug", "red_mug"],
        }
    }
}

type TaskDef = (Layout, &'static [Goal]);

#[derive(Debug, Clone, Copy)]
enum Goal {
    Place(&'static str, &'static str),
    Close(&'static str),
    Activate(&'static str),
}

use Goal::*;

const BASE_TASKS: [TaskDef; 10] = [
    (Layout::Basket, &[Place("soup", "basket"), Place("sauce", "basket")]),
    (Layout::Basket, &[Place("cheese", "basket"), Place("butter", "basket")]),
    (Layout::Stove, &[Activate("stove"), Place("moka", "stove")]),
    (Layout::Drawer, &[Place("bowl", "drawer"), Close("drawer")]),
    (Layout::Plates, &[Place("white_mug", "left_plate"), Place("yw_mug", "right_plate")]),
    (Layout::Caddy, &[Place("book", "caddy")]),
    (Layout::Plates, &[Place("white_mug", "left_plate"), Place("pudding", "right_plate")]),
    (Layout::Basket, &[Place("soup", "basket"), Place("cheese", "basket")]),
    (Layout::Stove, &[Place("moka", "stove")]),
    (Layout::Microwave, &[Place("yw_mug", "microwave"), Close("microwave")]),
];

const COMPOSE_TASKS: [TaskDef; 10] = [
    (Layout::Basket, &[Place("cheese", "basket"), Place("sauce", "basket")]),
    (Layout::Basket, &[Place("soup", "basket"), Place("butter", "basket")]),
    (Layout::Basket, &[Place("juice", "basket"), Place("sauce", "basket")]),
    (Layout::Basket, &[Place("milk", "basket"), Place("sauce", "basket")]),
    (Layout::Basket, &[Place("juice", "basket"), Place("butter", "basket")]),
    (Layout::Basket, &[Place("sauce", "basket"), Place("butter", "basket")]),
    (Layout::Basket, &[Place("milk", "basket"), Place("butter", "basket")]),
    (Layout::Basket, &[Place("ketchup", "basket"), Place("cheese", "basket")]),
    (Layout::Drawer, &[Place("wine", "drawer"), Close("drawer")]),
    (Layout::Plates, &[Place("red_mug", "left_plate"), Place("yw_mug", "right_plate")]),
];

const DISTRACTORS: [&str; 3] = ["bbq", "dressing", "orange"];

pub fn suite_size(suite: SuiteTag) -> usize {
    match suite {
        SuiteTag::Compose => COMPOSE_TASKS.len(),
        _ => BASE_TASKS.len(),
    }
}

fn resolve(goal: Goal) -> Subgoal {
    let fx = |k: &str| fixture_by_key(k).expect("catalog fixture");
    match goal {
        Place(o, f) => {
            let f = fx(f);
            Subgoal::place(object_by_key(o).expect("catalog object").id, f.id, f.kind)
        }
        Close(f) => Subgoal::Closed { fixture: fx(f).id },
        Activate(f) => Subgoal::Activated { fixture: fx(f).id },
    }
}

/// Subgoal list of a task without building its scene.
pub fn task_subgoals(suite: SuiteTag, task_index: usize) -> Result<Vec<Subgoal>, WorldError> {
    let table: &[TaskDef] = if suite == SuiteTag::Compose { &COMPOSE_TASKS } else { &BASE_TASKS };
    let (_, goals) = table
        .get(task_index)
        .ok_or(WorldError::UnknownTask { suite, index: task_index })?;
    Ok(goals.iter().copied().map(resolve).collect())
}

fn build_layout(layout: Layout, seed: u64) -> WorldState {
    let mut rng = stream(&[seed, layout.code(), purpose::SCENE]);
    let mut fixtures: Vec<Fixture> = layout
        .fixtures()
        .iter()
        .map(|&(key, (x, y))| {
            let e = fixture_by_key(key).expect("catalog fixture");
            Fixture {
                id: e.id,
                name: e.display.to_string(),
                kind: e.kind,
                pos: Pos::new(x, y),
                open: e.kind.is_openable().then_some(false),
                active: (e.kind == FixtureKind::Stove).then_some(false),
            }
        })
        .collect();
    fixtures.sort_by_key(|f| f.id);
    let mut cells: Vec<Pos> = (0..GRID)
        .flat_map(|y| (0..GRID).map(move |x| Pos::new(x, y)))
        .filter(|p| fixtures.iter().all(|f| f.pos != *p))
        .collect();
    cells.shuffle(&mut rng);
    let mut objects: Vec<Object> = layout
        .objects()
        .iter()
        .zip(cells.iter())
        .map(|(key, &pos)| {
            let e = object_by_key(key).expect("catalog object");
            Object { id: e.id, name: e.display.to_string(), pos, container: None }
        })
        .collect();
    objects.sort_by_key(|o| o.id);
    let start = Pos::new(rng.gen_range(0..GRID), rng.gen_range(0..GRID));
    WorldState {
        grid_width: GRID,
        grid_height: GRID,
        objects,
        fixtures,
        gripper: Gripper { pos: start, held: None },
        tick: 0,
    }
}

/// Adds one or two distractor objects on free cells and, for odd task
/// indices, swaps one non-target object for another distractor.
fn perturb_scene(state: &mut WorldState, subgoals: &[Subgoal], task_index: usize, seed: u64) {
    let mut rng = stream(&[seed, task_index as u64, purpose::DISTRACTOR]);
    let mut pool: Vec<&str> = DISTRACTORS.to_vec();
    pool.shuffle(&mut rng);
    let targets: Vec<_> = subgoals.iter().filter_map(|g| g.object()).collect();
    if task_index % 2 == 1 {
        if let Some(victim) = state
            .objects
            .iter()
            .filter(|o| !targets.contains(&o.id))
            .map(|o| o.id)
            .max()
        {
            let e = object_by_key(pool.pop().unwrap()).unwrap();
            let o = state.objects.iter_mut().find(|o| o.id == victim).unwrap();
            o.id = e.id;
            o.name = e.display.to_string();
        }
    }
    let adds = 1 + rng.gen_range(0..2usize).min(pool.len().saturating_sub(1));
    let mut free: Vec<Pos> = (0..state.grid_height)
        .flat_map(|y| (0..state.grid_width).map(move |x| Pos::new(x, y)))
        .filter(|p| state.is_free_floor(*p))
        .collect();
    free.shuffle(&mut rng);
    for pos in free.into_iter().take(adds) {
        let e = object_by_key(pool.pop().unwrap()).unwrap();
        state.objects.push(Object { id: e.id, name: e.display.to_string(), pos, container: None });
    }
    state.objects.sort_by_key(|o| o.id);
}

/// Builds the initial scene and task for `(suite, task_index, seed)`.
/// The base layout depends only on the task's layout and the seed, so the
/// language variants see exactly the base scene.
pub fn sample_scene(
    suite: SuiteTag,
    task_index: usize,
    seed: u64,
) -> Result<(WorldState, TaskSpec), WorldError> {
    let table: &[TaskDef] = if suite == SuiteTag::Compose { &COMPOSE_TASKS } else { &BASE_TASKS };
    let (layout, _) = *table
        .get(task_index)
        .ok_or(WorldError::UnknownTask { suite, index: task_index })?;
    let subgoals = task_subgoals(suite, task_index)?;
    let mut state = build_layout(layout, seed);
    if suite == SuiteTag::VisualScene {
        perturb_scene(&mut state, &subgoals, task_index, seed);
    }
    let surface = match suite {
        SuiteTag::LangRephrase => Surface::Rephrase,
        SuiteTag::LangObjectProperty => Surface::ObjectProperty,
        _ => Surface::Canonical,
    };
    let instruction = render(&subgoals, surface)?;
    debug_assert!(state.validate().is_ok());
    Ok((state, TaskSpec { instruction, subgoals, suite_tag: suite }))
}
