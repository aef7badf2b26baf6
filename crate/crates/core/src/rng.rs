//! Seeded random streams.
//!
//! Every random quantity comes from a ChaCha20 stream keyed by `(seed, stream)`,
//! so sample `k` of an experiment is reproducible on its own, independent of
//! how many threads ran or in which order jobs finished.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;

pub const GENERATOR_NAME: &str = "chacha20";

pub fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform angle on `(-pi, pi]`.
pub fn angle<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    PI - 2.0 * PI * u
}
