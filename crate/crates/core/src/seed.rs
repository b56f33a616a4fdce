//! Deterministic seed derivation for independent jobs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Job tags mixed into derived seeds.
pub mod tag {
    pub const OUTER_PLAN: u64 = 0x6f75_7465;
    pub const INNER_PLAN: u64 = 0x696e_6e65;
    pub const INNER_TRAIN: u64 = 0x7472_6169;
    pub const FINAL_TRAIN: u64 = 0x6669_6e61;
    pub const RETRY: u64 = 0x7265_7472;
    pub const HOLDOUT: u64 = 0x686f_6c64;
    pub const REPEAT: u64 = 0x7265_7065;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of job coordinates.
/// The result depends only on its arguments, never on scheduling.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
