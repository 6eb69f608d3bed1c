//! Seeded random-number plumbing.
//!
//! Every random decision in the toolkit flows from an explicit `u64` seed so
//! that runs are reproducible byte-for-byte. Sub-streams (parameter init,
//! epoch shuffling, corpus oversampling, ...) are derived from the run seed
//! plus a purpose tag, so adding a new consumer never perturbs existing ones.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Derive a deterministic sub-seed from a base seed and a purpose tag.
pub fn sub_seed(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, mixed with the base seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.rotate_left(17);
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// RNG for a given seed and purpose tag.
pub fn rng_for(seed: u64, tag: &str) -> Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, tag))
}
