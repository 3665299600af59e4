//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit seed. Independent chains draw
//! from substreams keyed by `(seed, chain_id)` so runs are reproducible
//! regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for the main stream of `seed`.
pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Generator for substream `chain` of `seed`.
pub fn substream(seed: u64, chain: u64) -> Rng {
    Rng::seed_from_u64(splitmix64(seed ^ splitmix64(chain.wrapping_add(0x5bd1_e995))))
}
