//! Seeded random streams.
//!
//! Every stochastic task draws from a ChaCha stream addressed by
//! `(seed, index)`, so parallel fan-out never changes results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream for item `index` of a campaign seeded with `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derive a child seed from a parent seed and a domain label, for
/// independent sub-campaigns sharing one user seed.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
