//! Seed derivation and the crate-wide RNG choice.
//!
//! Every randomized component takes an explicit `u64` seed and draws from a
//! `ChaCha8Rng` seeded with it. Sub-streams (per trial, per measurement
//! count) are derived from a master seed with `derive_seed`, so experiment
//! results reproduce across machines and thread counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic stream split: mixes the master seed with labeled parts.
///
/// SplitMix64-style finalizer applied over the concatenated inputs.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut state = master ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        state = state.wrapping_add(p).wrapping_add(0x9e37_79b9_7f4a_7c15);
        state = mix(state);
    }
    mix(state)
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_deterministic_and_label_sensitive() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
    }
}
