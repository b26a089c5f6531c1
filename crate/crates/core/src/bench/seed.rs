//! Per-task seeds.
//!
//! Every random stream in a benchmark run is seeded by
//! `derive_seed(base, cell, setting, purpose)`, which feeds the four values
//! through successive SplitMix64 finalizers. Streams for different purposes
//! never share a seed, so enabling or disabling a method leaves the sampled
//! parameters and data untouched.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Parameters = 1,
    Data = 2,
    Folds = 3,
    Entner = 4,
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, cell: usize, setting: usize, purpose: Purpose) -> u64 {
    let mut h = splitmix64(base);
    for v in [cell as u64, setting as u64, purpose as u64] {
        h = splitmix64(h ^ v);
    }
    h
}
