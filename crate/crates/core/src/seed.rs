//! Stable seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a `u64`
//! obtained here. The mixing functions are fixed so that seeds stay the same
//! across platforms and compiler versions (unlike `std`'s `DefaultHasher`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th Monte Carlo run under `master`.
pub fn run_seed(master: u64, index: u64) -> u64 {
    mix(mix(master) ^ index.wrapping_mul(0x2545_f491_4f6c_dd1d))
}

/// Seed derived from `master` and an ordered list of string labels
/// (country codes, mode codes, stage names).
pub fn labeled_seed(master: u64, labels: &[&str]) -> u64 {
    let mut h = FNV_OFFSET ^ mix(master);
    for label in labels {
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        // separator so ("ab","c") and ("a","bc") differ
        h ^= 0xff;
        h = h.wrapping_mul(FNV_PRIME);
    }
    mix(h)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
