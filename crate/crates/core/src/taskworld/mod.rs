//! Symbolic tabletop-manipulation world: scene state, deterministic dynamics,
//! subgoal predicates, the instruction grammar, scripted expert, benchmark
//! suites, and canonical state snapshots.

pub mod blob;
pub mod catalog;
pub mod dynamics;
pub mod expert;
pub mod grammar;
pub mod scenes;
pub mod state;

use thiserror::Error;

pub use blob::{restore, snapshot, state_hash, StateBlob};
pub use dynamics::{all_satisfied, alternatives, eval_predicate, satisfied_prefix, step};
pub use expert::{expert_action, expert_action_jittered};
pub use grammar::{compile_instruction, parse_plan_sentence, plan_sentence, render, Surface};
pub use scenes::{sample_scene, suite_size, task_subgoals};
pub use state::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("unknown object id {0:?}")]
    UnknownObject(ObjectId),
    #[error("unknown fixture id {0:?}")]
    UnknownFixture(FixtureId),
    #[error("no task {index} in suite {suite}")]
    UnknownTask { suite: SuiteTag, index: usize },
    #[error("instruction {text:?} matches no grammar production; nearest is {nearest:?}")]
    Parse { text: String, nearest: String },
    #[error("grammar: {0}")]
    Grammar(String),
    #[error("goal unreachable: {0}")]
    Unreachable(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("malformed state blob: {0}")]
    MalformedBlob(String),
}
