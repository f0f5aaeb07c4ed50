//! Seeded random streams and the seed-derivation scheme used by every experiment.
//!
//! A replicate's stream is fully determined by a master seed and a short list of
//! integer keys (experiment kind, d, n, replicate index). Keys are folded in with
//! the SplitMix64 finalizer, so streams for different keys are decorrelated and
//! any replicate can be regenerated in isolation.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator behind every sampling routine in this crate.
pub type Stream = Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `keys` into `master` one at a time.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| {
        splitmix64(acc ^ splitmix64(k))
    })
}

pub fn stream_from_seed(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}

pub fn derive_stream(master: u64, keys: &[u64]) -> Stream {
    stream_from_seed(derive_seed(master, keys))
}
