//! Deterministic random-number streams.
//!
//! Every stochastic component draws from its own named substream derived
//! from one master seed, so reordering or skipping a component never
//! perturbs the draws seen by another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives the substream seed for `name` under `seed` (FNV-1a over the
/// seed bytes followed by the name bytes).
pub fn substream_seed(seed: u64, name: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes() {
        h = (h ^ b as u64).wrapping_mul(PRIME);
    }
    for b in name.as_bytes() {
        h = (h ^ *b as u64).wrapping_mul(PRIME);
    }
    h
}

/// A seeded generator for the named substream of `seed`.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, name))
}
