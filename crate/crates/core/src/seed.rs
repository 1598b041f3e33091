//! Seed derivation.
//!
//! Every random stream in the simulator is a ChaCha8 generator keyed by a
//! base seed and a stream tag, so results never depend on call order or
//! thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Each consumer of randomness owns one.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const GROW: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const SELECT: u64 = 4;
    pub const CLIENT: u64 = 5;
    pub const EMBEDDING: u64 = 6;
    pub const SPLIT: u64 = 7;
    pub const KFOLD: u64 = 8;
    pub const SERVER: u64 = 9;
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` for the given stream and index.
pub fn derive(base: u64, stream: u64, index: u64) -> u64 {
    mix(mix(base ^ mix(stream)) ^ index)
}

/// A generator on a derived seed.
pub fn rng(base: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, stream, index))
}
