//! Deterministic seed derivation.
//!
//! Every random decision in the pipeline draws from a [`ChaCha8Rng`] whose
//! seed is derived from a user-supplied base seed plus a fixed role tag and
//! index path. Derived seeds depend only on their own path, so e.g. adding
//! cross-validation runs never changes the seeds of existing cells.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed roles. Each consumer of randomness gets its own stream tag.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const FOLDS: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const AUGMENT: u64 = 4;
    pub const SENTENCE: u64 = 5;
    pub const CELL: u64 = 6;
    pub const PREVIEW: u64 = 7;
}

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GAMMA);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and a path of parts (tag first).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = splitmix64(base);
    for &p in parts {
        x = splitmix64(x ^ p.wrapping_mul(GAMMA));
    }
    x
}

/// A ChaCha generator for the given derived seed path.
pub fn seeded_rng(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}
