//! Deterministic seed derivation.
//!
//! All randomness in this crate flows from explicit 64-bit seeds through
//! ChaCha8 streams. Sub-seeds for parallel tasks are derived with the
//! SplitMix64 finalizer over `(global_seed, fnv1a64(purpose), index)`, so a
//! run is reproducible on any platform and independent of worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function (Steele, Lea & Flood 2014). One full avalanche
/// step; used here as a mixing finalizer, not as a stream generator.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a 64-bit hash of a byte string.
#[inline]
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the sub-seed for `(purpose, index)` from a global seed.
///
/// The chain is `splitmix64(splitmix64(global ^ fnv1a64(purpose)) ^ index)`,
/// which keeps streams for distinct purposes and indices decorrelated while
/// staying replayable from the single global seed.
#[inline]
pub fn derive_seed(global_seed: u64, purpose: &str, index: u64) -> u64 {
    splitmix64(splitmix64(global_seed ^ fnv1a64(purpose.as_bytes())) ^ index)
}

/// ChaCha8 stream for a derived seed. ChaCha8 is specified bit-exactly and
/// has no platform-dependent state, unlike the default thread RNG.
#[inline]
pub fn rng_for(global_seed: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(global_seed, purpose, index))
}

/// ChaCha8 stream seeded directly from a 64-bit seed.
#[inline]
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Reference outputs for SplitMix64 seeded with 0: the n-th output is
        // splitmix64(n * GOLDEN) under this formulation.
        const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(splitmix64(GOLDEN), 0x6e78_9e6a_a1b9_65f4);
        assert_eq!(splitmix64(GOLDEN.wrapping_mul(2)), 0x06c4_5d18_8009_454f);
    }

    #[test]
    fn fnv_reference_value() {
        // Known FNV-1a 64 test vector.
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn derived_seeds_differ_by_purpose_and_index() {
        let a = derive_seed(42, "sample", 0);
        let b = derive_seed(42, "sample", 1);
        let c = derive_seed(42, "mc", 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
        assert_eq!(a, derive_seed(42, "sample", 0));
    }
}
