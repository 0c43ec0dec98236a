//! Seed derivation for independent random streams.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit
//! value. Child seeds are derived from a parent seed and a path of integer
//! labels by chaining the SplitMix64 finalizer:
//!
//! ```text
//! s_0 = parent
//! s_{i+1} = mix(s_i ^ mix(label_i + GOLDEN))
//! ```
//!
//! The rule is counter-based: the seed of job `k` depends only on
//! `(master_seed, labels…, k)`, never on how many jobs exist or the order in
//! which they run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(parent, |s, &l| mix(s ^ mix(l.wrapping_add(GOLDEN))))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream domains, so that e.g. the TM seed and the CV seed of job 3 differ.
pub mod domain {
    pub const TM: u64 = 1;
    pub const CV: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const SUBSETS: u64 = 4;
    pub const PROBES: u64 = 5;
    pub const BASELINE: u64 = 6;
    pub const DATA: u64 = 7;
    pub const LABEL_SHUFFLE: u64 = 8;
}

pub const DERIVATION_RULE: &str =
    "ChaCha8Rng::seed_from_u64(derive_seed(master, [domain, index...])); derive_seed chains SplitMix64";
