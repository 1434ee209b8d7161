//! Derivation of independent RNG streams from a single user-facing seed.
//!
//! Every randomized stage (weight init, rounding draws, graph sampling,
//! split shuffling, ...) gets its own stream constant so that changing one
//! stage's consumption pattern never shifts the randomness of another.

/// Weight initialization stream.
pub const STREAM_WEIGHT_INIT: u64 = 0x01;
/// Randomized rounding of a relaxed perturbation.
pub const STREAM_ROUNDING: u64 = 0x02;
/// Stochastic block model edge sampling.
pub const STREAM_SBM_EDGES: u64 = 0x03;
/// Stochastic block model feature sampling.
pub const STREAM_SBM_FEATURES: u64 = 0x04;
/// Train/test split shuffling.
pub const STREAM_SPLIT: u64 = 0x05;
/// Random edge-rewiring baseline attack.
pub const STREAM_DICE: u64 = 0x06;

/// Mixes a user seed with a stream constant into an independent RNG seed
/// using two rounds of the splitmix64 finalizer.
pub fn mix(seed: u64, stream: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(stream)))
}

/// Fisher-Yates shuffle; kept local so the draw count stays stable across
/// rand versions.
pub(crate) fn shuffle<T>(items: &mut [T], rng: &mut impl rand::Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
