//! Seed plumbing. Every stochastic step draws from a ChaCha8 stream whose
//! seed is derived from the run's master seed plus a tag, so results do not
//! depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `tag` under `master`.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    splitmix64(master ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Child seed for a path of tags.
pub fn derive_seed_path(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(master, |acc, &t| derive_seed(acc, t))
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
