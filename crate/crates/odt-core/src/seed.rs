//! Deterministic seed derivation.
//!
//! Every random draw in the library flows from one master seed through
//! [`derive_seed`], so independent work items (dataset records, training
//! epochs, dropout masks) get decorrelated streams that do not depend on
//! execution order or thread count. Reruns with the same master seed
//! reproduce every artifact byte for byte.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; full-period mixing of a 64-bit state.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a master seed and a list of tags (record index, epoch, purpose
/// discriminant, ...) into one well-mixed child seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut acc = splitmix64(master);
    for &t in tags {
        acc = splitmix64(acc ^ t.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    acc
}

/// Child RNG for one work item. ChaCha8 keystreams are stable across
/// platforms, so a given (master, tags) pair always yields the same draws.
pub fn derive_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}
