//! Seeded randomness.
//!
//! Every stochastic operation takes an [`RngSeed`] and derives independent
//! child seeds for its parts with [`RngSeed::derive`]. Derivation uses the
//! SplitMix64 finalizer, and streams come from ChaCha8, so a given seed gives
//! the same bits on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A 64-bit experiment seed. Equal seeds give identical streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub const fn new(seed: u64) -> Self {
        RngSeed(seed)
    }

    /// Child seed for the part labelled `tag`.
    ///
    /// `child = mix64(seed + γ·(tag + 1))` with γ the golden-ratio increment
    /// used by SplitMix64. Children of distinct tags are statistically
    /// independent streams.
    pub fn derive(self, tag: u64) -> RngSeed {
        RngSeed(mix64(
            self.0
                .wrapping_add(GOLDEN_GAMMA.wrapping_mul(tag.wrapping_add(1))),
        ))
    }

    /// Child seed for a matrix cell: `derive(i).derive(j)`.
    pub fn derive_cell(self, i: usize, j: usize) -> RngSeed {
        self.derive(i as u64).derive(j as u64)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        RngSeed(seed)
    }
}

/// Hash of a slice of floats by bit pattern; used to bind seeds to token
/// content rather than to token position. `-0.0` and `0.0` hash alike.
pub fn content_hash(values: &[f64]) -> u64 {
    let mut h = mix64(values.len() as u64);
    for &v in values {
        let bits = if v == 0.0 { 0 } else { v.to_bits() };
        h = mix64(h ^ bits.wrapping_add(GOLDEN_GAMMA));
    }
    h
}
