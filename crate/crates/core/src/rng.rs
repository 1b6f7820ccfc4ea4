//! Keyed random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream whose seed is a
//! pure function of the caller's master seed and a short key path (block index, chunk
//! index, trial index, ...). Work can therefore be split across threads in any order
//! without changing a single output bit.
//!
//! Normal variates use the ziggurat sampler of `rand_distr::StandardNormal`, which is a
//! deterministic transform of the underlying uniform stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep unrelated consumers of the same master seed apart.
pub mod tag {
    pub const GRAPH: u64 = 0x4752_4150;
    pub const MODEL: u64 = 0x4d4f_4445;
    pub const SAMPLE: u64 = 0x5341_4d50;
    pub const TARGET: u64 = 0x5441_5247;
    pub const TRIAL: u64 = 0x5452_4941;
    pub const FORM: u64 = 0x464f_524d;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a key path into a single 64-bit seed.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// ChaCha8 generator keyed by `(master, keys...)`.
pub fn keyed_rng(master: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, keys))
}
