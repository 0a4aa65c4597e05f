//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! derived from a 64-bit master seed, so results never depend on execution
//! order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for one customer: `mix(master) ^ index`.
///
/// The master seed is mixed first; with a bare `master ^ index`, small master
/// seeds only permute the customers of a population whose size is a multiple
/// of a power of two.
pub fn customer_stream(master: u64, index: usize) -> Rng {
    ChaCha8Rng::seed_from_u64(mix(master) ^ index as u64)
}

fn mix(seed: u64) -> u64 {
    derive(seed, 0, 0)
}

/// Mixes a base seed with a tag and an index (splitmix64 finaliser), for
/// per-run and per-purpose sub-seeds.
pub fn derive(base: u64, tag: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
