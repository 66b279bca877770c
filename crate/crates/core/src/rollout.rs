//! Hypothesize and predict: K candidate act branches rolled out in lockstep
//! on K environment replicas, plus re-synchronization to the chosen outcome.

use rand::Rng;
use thiserror::Error;

use crate::clock::Millis;
use crate::policy::{PlanRecord, ReasoningPolicy, SegmentState};
use crate::rng::{purpose, stream, SegmentStreams};
use crate::taskworld::{state_hash, step, ActionToken, WorldState};
use crate::verify::{sampling_step_cost, LatencyModel, VerifyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RolloutError {
    #[error("stale candidate: produced from {candidate:#018x}, pool is at {pool:#018x}")]
    Stale { candidate: u64, pool: u64 },
    #[error("replica {index} hash {found:#018x} differs from base {base:#018x}")]
    Incoherent { index: usize, found: u64, base: u64 },
    #[error(transparent)]
    Latency(#[from] VerifyError),
}

/// K replicas of the environment that all start each round from one state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvPool {
    replicas: Vec<WorldState>,
    base: WorldState,
    base_hash: u64,
}

impl EnvPool {
    pub fn new(state: &WorldState, k: usize) -> Self {
        assert!(k >= 1, "pool needs at least one replica");
        Self {
            replicas: vec![state.clone(); k],
            base: state.clone(),
            base_hash: state_hash(state),
        }
    }

    pub fn k(&self) -> usize {
        self.replicas.len()
    }

    pub fn base_hash(&self) -> u64 {
        self.base_hash
    }

    pub fn base_state(&self) -> &WorldState {
        &self.base
    }

    pub fn replicas(&self) -> &[WorldState] {
        &self.replicas
    }

    pub fn replica_hashes(&self) -> Vec<u64> {
        self.replicas.iter().map(state_hash).collect()
    }

    /// Errors unless every replica is at the base state.
    pub fn check_coherent(&self) -> Result<(), RolloutError> {
        for (index, r) in self.replicas.iter().enumerate() {
            let found = state_hash(r);
            if found != self.base_hash {
                return Err(RolloutError::Incoherent { index, found, base: self.base_hash });
            }
        }
        Ok(())
    }

    /// Moves every replica to `state` and rebases the pool there.
    pub fn reset_to(&mut self, state: &WorldState) {
        for r in &mut self.replicas {
            r.clone_from(state);
        }
        self.base = state.clone();
        self.base_hash = state_hash(state);
    }
}

/// One hypothesized act branch and its predicted outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRollout {
    pub index: usize,
    /// Emitted tokens; ends in `Think` unless the rollout was cut at a chunk boundary.
    pub tokens: Vec<ActionToken>,
    /// Predicted state after each physical token.
    pub trace: Vec<WorldState>,
    pub gen_finish: Millis,
    /// Number of physical actions, H_k.
    pub segment_len: usize,
    pub base_hash: u64,
    /// Act-branch context after the last token, for chunked continuation.
    pub seg: SegmentState,
}

impl CandidateRollout {
    pub fn final_state<'a>(&'a self, base: &'a WorldState) -> &'a WorldState {
        self.trace.last().unwrap_or(base)
    }

    pub fn ended_with_think(&self) -> bool {
        self.tokens.last() == Some(&ActionToken::Think)
    }
}

/// Knobs shared by every candidate of one round.
#[derive(Debug, Clone, Copy)]
pub struct RoundSpec<'a> {
    pub policy: &'a ReasoningPolicy,
    pub lat: &'a LatencyModel,
    /// Virtual instant the round starts.
    pub t0: Millis,
    /// Probability that the predictor substitutes a random action for the
    /// emitted one when stepping the replica.
    pub dynamics_noise: f64,
    /// Stop after this many physical actions without emitting `Think`.
    pub chunk_len: Option<usize>,
}

fn roll_one(
    replica: &mut WorldState,
    index: usize,
    mut seg: SegmentState,
    seed: u64,
    spec: &RoundSpec<'_>,
    step_cost: Millis,
    base_hash: u64,
) -> CandidateRollout {
    let mut rng = stream(&[seed]);
    let mut dyn_rng = stream(&[seed, purpose::DYNAMICS]);
    let mut tokens = Vec::new();
    let mut trace = Vec::new();
    loop {
        if spec.chunk_len.is_some_and(|c| trace.len() >= c) {
            break;
        }
        let tok = spec.policy.next_token(replica, &mut seg, &mut rng);
        tokens.push(tok);
        if tok == ActionToken::Think {
            break;
        }
        let applied = if spec.dynamics_noise > 0.0 && dyn_rng.gen::<f64>() < spec.dynamics_noise {
            ActionToken::PHYSICAL[dyn_rng.gen_range(0..ActionToken::PHYSICAL.len())]
        } else {
            tok
        };
        *replica = step(replica, applied);
        trace.push(replica.clone());
    }
    let segment_len = trace.len();
    // The terminating Think rides on the last decode step; a Think-only
    // candidate still pays for one step.
    let gen_finish = spec.t0 + segment_len.max(1) as f64 * step_cost;
    CandidateRollout { index, tokens, trace, gen_finish, segment_len, base_hash, seg }
}

/// Samples one act branch per replica for `plan`. Candidate k draws from the
/// sub-stream derived from (episode seed, segment, k).
pub fn hypothesize_predict(
    pool: &mut EnvPool,
    plan: &PlanRecord,
    spec: &RoundSpec<'_>,
    streams: &SegmentStreams,
) -> Result<Vec<CandidateRollout>, RolloutError> {
    pool.check_coherent()?;
    let step_cost = sampling_step_cost(pool.k(), spec.lat)?;
    let base_hash = pool.base_hash;
    let mut out = Vec::with_capacity(pool.k());
    for (index, replica) in pool.replicas.iter_mut().enumerate() {
        let seed = streams.candidate_seed(index);
        let mut open_rng = stream(&[seed, purpose::PLAN]);
        let seg = spec.policy.open_segment(plan, replica, &mut open_rng);
        out.push(roll_one(replica, index, seg, seed, spec, step_cost, base_hash));
    }
    Ok(out)
}

/// Continues an already-open act branch on every replica (chunked value
/// steering re-selects mid-segment).
pub fn continue_predict(
    pool: &mut EnvPool,
    seg: &SegmentState,
    spec: &RoundSpec<'_>,
    streams: &SegmentStreams,
    chunk: u64,
) -> Result<Vec<CandidateRollout>, RolloutError> {
    pool.check_coherent()?;
    let step_cost = sampling_step_cost(pool.k(), spec.lat)?;
    let base_hash = pool.base_hash;
    let mut out = Vec::with_capacity(pool.k());
    for (index, replica) in pool.replicas.iter_mut().enumerate() {
        let seed = crate::rng::derive_seed(&[streams.candidate_seed(index), chunk]);
        out.push(roll_one(replica, index, seg.clone(), seed, spec, step_cost, base_hash));
    }
    Ok(out)
}

/// Sets every replica to the chosen candidate's predicted final state.
pub fn sync_pool(pool: &mut EnvPool, chosen: &CandidateRollout) -> Result<(), RolloutError> {
    if chosen.base_hash != pool.base_hash {
        return Err(RolloutError::Stale { candidate: chosen.base_hash, pool: pool.base_hash });
    }
    let target = chosen.final_state(&pool.base).clone();
    pool.reset_to(&target);
    Ok(())
}

/// Executes `tokens` on `state` with the true dynamics.
pub fn replay(state: &WorldState, tokens: &[ActionToken]) -> WorldState {
    tokens
        .iter()
        .filter(|t| **t != ActionToken::Think)
        .fold(state.clone(), |s, t| step(&s, *t))
}
