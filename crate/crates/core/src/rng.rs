//! Deterministic random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from a
//! master seed, so results never depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer, used to decorrelate derived seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-component `index` of `seed`.
pub fn derive(seed: u64, index: u64) -> u64 {
    mix(seed ^ mix(index))
}

/// Random stream `stream_id` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Noise stream for example `example` at training step `step`.
pub fn example_stream(seed: u64, step: u64, example: u64) -> StreamRng {
    stream(derive(seed, step), example)
}

/// Draws from `Normal(0, sigma²)`; `sigma == 0` yields exact zeros.
pub fn normal<R: rand::Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma)
        .expect("sigma validated as finite and non-negative")
        .sample(rng)
}
