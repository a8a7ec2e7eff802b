//! Deterministic seed derivation.
//!
//! Every random stage of an experiment (split, initial labels, per-batch
//! selection, per-tree bootstrap, ...) draws from its own RNG whose seed is
//! derived from the master seed and a path of stage labels. Adding a strategy
//! or reordering stages therefore never perturbs the randomness of another
//! stage.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; full-period mixer with good avalanche behavior.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of component labels.
///
/// The derivation is a pure function of its arguments and is stable across
/// platforms and releases of this crate.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(base);
    for &component in path {
        state = splitmix64(state ^ splitmix64(component));
    }
    state
}

/// A seeded RNG for one stage. ChaCha8 is cheap, portable and has a stable
/// stream for a given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stage labels used by the harness when deriving per-stage seeds.
pub mod stage {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SELECT: u64 = 3;
    pub const EVAL: u64 = 4;
}
