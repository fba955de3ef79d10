//! Seed derivation for independent, reproducible random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed that is mixed
//! from a base seed and a list of tags (game index, turn, rollout index...).
//! The same tags always give the same stream regardless of which thread or
//! in which order the stream is created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a base seed with a sequence of tags into a new 64-bit seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(base);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(base: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, tags))
}

/// Seed of the `index`-th game of a run; shared by every condition so that
/// comparisons are paired on identical deals.
pub fn game_seed(base: u64, index: u64) -> u64 {
    derive_seed(base, &[0x6761_6d65, index])
}
