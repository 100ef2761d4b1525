//! Deterministic seed derivation.
//!
//! Every job, restart and pool run draws from its own ChaCha stream selected by
//! `(master seed, index)`, so results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` under `master`.
pub fn derived(master: u64, index: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(master);
    r.set_stream(index.wrapping_add(1));
    r
}

/// A child seed for APIs that take a plain `u64`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    use rand::RngCore;
    derived(master, index).next_u64()
}
