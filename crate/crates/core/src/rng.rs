//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha stream derived from
//! a `(seed, stream)` pair, so results never depend on evaluation order or
//! on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer, used to decorrelate nearby seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream label.
pub fn derive(seed: u64, stream: u64) -> u64 {
    mix(mix(seed) ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream))
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal3(rng: &mut Rng) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(normal(rng), normal(rng), normal(rng))
}
