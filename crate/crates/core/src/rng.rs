//! Seed derivation.
//!
//! Every stochastic routine takes either a generator or a 64-bit seed. Work
//! that is split across replicas or output chunks derives one independent
//! stream per unit from `(master, tags...)`, never from the thread that
//! happens to run it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate. ChaCha output is specified
/// bit-for-bit, so streams are reproducible across platforms.
pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a sequence of tags into a 64-bit substream seed.
pub fn mix_seed(master: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for (i, &t) in tags.iter().enumerate() {
        h = splitmix64(h ^ splitmix64(t ^ (i as u64).wrapping_mul(GOLDEN)));
    }
    h
}

pub fn stream(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn substream(master: u64, tags: &[u64]) -> SimRng {
    stream(mix_seed(master, tags))
}
