//! Seed derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a base
//! seed and a small tuple of indices (episode, step, iteration, particle, ...)
//! so that results never depend on evaluation order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags so that two streams derived from the same indices never alias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Env = 1,
    Plan = 2,
    ActionSample = 3,
    EtaSample = 4,
    Rollout = 5,
    Thompson = 6,
    Holdout = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stream: Stream, indices: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ (stream as u64).rotate_left(32));
    for &i in indices {
        h = splitmix64(h ^ i);
    }
    h
}

pub fn derive(base: u64, stream: Stream, indices: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, stream, indices))
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
