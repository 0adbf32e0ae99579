//! Deterministic per-stream seeds.
//!
//! A stream seed is `mix(mix(mix(mix(master) ^ tag) ^ iteration) ^ index)`
//! where `mix` is the SplitMix64 finalizer. Every rollout owns the stream
//! named by `(master seed, kind, iteration, rollout index)`, so batches are
//! reproducible regardless of how rollouts are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Policy and actuator initialization.
    Init,
    /// Training and baseline rollouts; shared so both modes see the same noise.
    Rollout,
    /// Controlled rollouts of the verification suite.
    VerifyControlled,
    /// Uncontrolled rollouts of the verification suite.
    VerifyUncontrolled,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::Init => 0x494e_4954,
            StreamKind::Rollout => 0x524f_4c4c,
            StreamKind::VerifyControlled => 0x5643_544c,
            StreamKind::VerifyUncontrolled => 0x5655_4e43,
        }
    }
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_seed(master: u64, kind: StreamKind, iteration: u64, index: u64) -> u64 {
    mix(mix(mix(mix(master) ^ kind.tag()) ^ iteration) ^ index)
}

pub fn stream_rng(master: u64, kind: StreamKind, iteration: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, kind, iteration, index))
}
