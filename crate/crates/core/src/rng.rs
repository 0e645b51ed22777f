//! Seed derivation. Every random stream in the crate is derived from a user
//! seed by mixing in counters, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for algorithm-side randomness.
pub type TrialRng = ChaCha8Rng;

/// SplitMix64 finalizer applied to `seed ^ f(counter)`.
#[inline]
pub fn mix(seed: u64, counter: u64) -> u64 {
    let mut z = seed
        ^ counter
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps 64 random bits to `[0, 1)` using the top 53 bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn seeded(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of trial `index` under master seed `seed`.
#[inline]
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    mix(mix(seed, 0x5452_4941_4c53), index)
}
