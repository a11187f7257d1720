//! Seeded random streams.
//!
//! Every consumer of randomness draws from a ChaCha8 generator keyed by a
//! 64-bit seed and a [`Stream`] id. ChaCha's stream parameter gives each
//! purpose an independent sequence for the same seed, so adding a new
//! purpose never shifts the values another purpose sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    CzMask = 1,
    Padding = 2,
    InitialParams = 3,
    Sampling = 4,
    Lanczos = 5,
}

pub fn stream(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a path of keys, e.g.
/// `(master, [cell, instance])` or `(seed, [sample])`.
pub fn derive_seed(parent: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(mix64(parent), |acc, &k| mix64(acc ^ mix64(k.wrapping_add(0x5851_F42D_4C95_7F2D))))
}
