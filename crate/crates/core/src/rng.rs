//! Seed-stream derivation.
//!
//! Every stochastic draw in the simulator comes from a ChaCha8 stream whose
//! seed is derived from a tuple of integers (episode seed, segment index,
//! candidate index, purpose tag). Streams are never shared between purposes,
//! so cancelling a verification or adding a candidate cannot shift the draws
//! of any other consumer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Purpose tags mixed into derived seeds.
pub mod purpose {
    pub const SCENE: u64 = 0x5343_454e;
    pub const DISTRACTOR: u64 = 0x4449_5354;
    pub const PLAN: u64 = 0x504c_414e;
    pub const CANDIDATE: u64 = 0x4341_4e44;
    pub const DYNAMICS: u64 = 0x4459_4e41;
    pub const VERIFY: u64 = 0x5645_5249;
    pub const FALLBACK: u64 = 0x4641_4c4c;
    pub const VANILLA: u64 = 0x5641_4e49;
    pub const DEMO: u64 = 0x4445_4d4f;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive mix of `parts` into one 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut acc = 0x6a09_e667_f3bc_c908u64;
    for &p in parts {
        acc = splitmix64(acc ^ splitmix64(p));
    }
    acc
}

pub fn stream(parts: &[u64]) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

/// Streams for one reasoning step of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentStreams {
    pub episode_seed: u64,
    pub segment: u64,
}

impl SegmentStreams {
    pub fn new(episode_seed: u64, segment: u64) -> Self {
        Self {
            episode_seed,
            segment,
        }
    }

    pub fn plan(&self) -> Stream {
        stream(&[self.episode_seed, self.segment, purpose::PLAN])
    }

    pub fn candidate_seed(&self, k: usize) -> u64 {
        derive_seed(&[self.episode_seed, self.segment, k as u64, purpose::CANDIDATE])
    }

    pub fn candidate_seeds(&self, k: usize) -> Vec<u64> {
        (0..k).map(|i| self.candidate_seed(i)).collect()
    }

    pub fn verify(&self, k: usize) -> Stream {
        stream(&[self.episode_seed, self.segment, k as u64, purpose::VERIFY])
    }

    pub fn fallback(&self) -> Stream {
        stream(&[self.episode_seed, self.segment, purpose::FALLBACK])
    }
}
