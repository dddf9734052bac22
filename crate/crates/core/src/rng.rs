//! Seed handling.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a `u64`.
//! Independent sub-streams (per trial, per repetition, per purpose) are
//! obtained with [`derive_seed`], so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser applied to `master ^ golden·(stream+1)`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream identifiers used across the crate.
pub mod stream {
    pub const GRAPH: u64 = 0;
    pub const FEATURES: u64 = 1;
    pub const SIGNS: u64 = 2;
    pub const INIT: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const SPLIT: u64 = 5;
}
