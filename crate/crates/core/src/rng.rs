//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from `(base seed, stream index)`, so results never depend on the
//! order in which parallel work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` of `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags keep unrelated consumers of one user seed apart.
pub(crate) mod tag {
    pub const REPLICATE: u64 = 0x5245_504c;
    pub const WEIGHTS: u64 = 0x5745_4947;
    pub const TREE: u64 = 0x5452_4545;
    pub const NODE: u64 = 0x4e4f_4445;
    pub const VIMP: u64 = 0x5649_4d50;
    pub const FOLDS: u64 = 0x464f_4c44;
    pub const SPLIT: u64 = 0x5350_4c54;
    pub const METHOD: u64 = 0x4d45_5448;
    pub const CV_TREE: u64 = 0x4356_5452;
}

pub(crate) fn stream(base: u64, tag: u64, index: u64) -> Rng {
    rng_from_seed(derive_seed(derive_seed(base, tag), index))
}

pub(crate) fn stream_seed(base: u64, tag: u64, index: u64) -> u64 {
    derive_seed(derive_seed(base, tag), index)
}
