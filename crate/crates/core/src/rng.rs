//! Counter-based pseudorandomness.
//!
//! Sketch components that must be regenerated on the query side (hash
//! coefficients, sign matrices, per-level seeds) are derived from a stored
//! 64-bit seed through these stateless mixers, so nothing but the seed needs
//! to be serialized.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child value from a seed and a sequence of tags.
#[inline]
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(seed), |acc, &t| mix64(acc ^ mix64(t)))
}

/// Domain-separation tags for the derived streams.
pub mod tag {
    pub const HASH: u64 = 0x4841_5348;
    pub const SIGN: u64 = 0x5349_474E;
    pub const SCALE: u64 = 0x5343_414C;
    pub const PROJECTION: u64 = 0x4A4C_5052;
    pub const JL: u64 = 0x4A4C_4A4C;
    pub const SHIFT: u64 = 0x5348_4946;
    pub const TRIAL: u64 = 0x5452_4941;
    pub const QUERY: u64 = 0x5155_4552;
}

/// A seeded general-purpose generator for instance generation.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
