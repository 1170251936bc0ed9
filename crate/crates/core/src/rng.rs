//! Seed derivation. Every random stream in the crate is a `ChaCha8Rng` keyed
//! by a base seed plus a path of integers, so streams are independent of
//! evaluation order and stable across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a base seed and a key path into one 64-bit seed.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(seed), |acc, &k| mix(acc ^ mix(k)))
}

pub fn seeded(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, path))
}

/// Deterministic value in `(0, 1)` for a key path.
pub fn unit_open(seed: u64, path: &[u64]) -> f64 {
    let bits = derive(seed, path) >> 11;
    (bits as f64 + 0.5) / (1u64 << 53) as f64
}
