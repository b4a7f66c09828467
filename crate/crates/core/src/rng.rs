//! Seeding conventions.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit value. Derived seeds (per trial, per grid point) are produced by
//! folding the components through the SplitMix64 finalizer, which is stable
//! across platforms and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for graph construction and signal sampling.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a sequence of words, used to derive child seeds.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C908, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
