//! Per-replica seed derivation.
//!
//! `derive_seed(m, i) = mix(mix(m) + (i + 1) * G)` where `mix` is the
//! SplitMix64 finaliser and `G = 0x9E37_79B9_7F4A_7C15`. `mix` is a bijection
//! of `u64` and `G` is odd, so for a fixed master seed the map `i -> seed` is
//! injective over all 2^64 indices.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replica `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}
