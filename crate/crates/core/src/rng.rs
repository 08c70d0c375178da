//! Seeding conventions.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] built by
//! [`rng_from_seed`]. Independent streams are obtained by mixing a master
//! seed with a sequence of integer tags ([`derive_seed`]), e.g.
//! `derive_seed(master, &[replica, n, purpose])`. Mixing uses the SplitMix64
//! finalizer, so nearby tags give unrelated seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type HcmRng = ChaCha8Rng;

/// Stream purposes used when one seed drives several stages.
pub mod purpose {
    pub const SEQUENCE: u64 = 1;
    pub const PAIRING: u64 = 2;
    pub const EXPLORATION: u64 = 3;
    pub const PERCOLATION: u64 = 4;
    pub const LIMIT_PATH: u64 = 5;
    pub const MARKS: u64 = 6;
    pub const KERNEL: u64 = 7;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from_seed(seed: u64) -> HcmRng {
    ChaCha8Rng::seed_from_u64(seed)
}
