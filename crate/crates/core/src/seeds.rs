//! Deterministic seed derivation.
//!
//! Every stochastic unit of work (one adaptive track, one noise token, one
//! Monte-Carlo batch) gets its own [`ChaCha12Rng`] seeded through a stateless
//! avalanche mix of the parent seed and a child index. Work units are
//! therefore reproducible in isolation and independent of scheduling, which
//! keeps parallel and sequential execution bit-identical.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// 64-bit finalizer with full avalanche (splitmix64 style).
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of child `index` from `parent`. The map is injective in
/// practice (no collisions across the index ranges used here) and scrambles
/// structured parent seeds such as 0, 1, 2.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    mix(parent ^ mix(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// Builds the stream cipher RNG used everywhere in the engine.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
