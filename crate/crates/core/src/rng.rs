//! Seeded randomness.
//!
//! All stochastic code in this crate draws from a ChaCha8 stream seeded
//! explicitly by the caller, and normal variates are produced by the
//! Box-Muller transform (two uniform draws per pair of normals), so every
//! result is reproducible bit-for-bit across platforms given the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::num::Real;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One Box-Muller pair of independent standard normals.
///
/// Consumes exactly two uniform `f64` draws from the stream.
#[inline]
pub fn standard_normal_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    // u1 in (0, 1] so the logarithm stays finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = core::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Fills `out` with i.i.d. standard normal draws.
///
/// Odd lengths discard the second member of the final pair, keeping the
/// stream position a pure function of `out.len()`.
pub fn fill_standard_normal<T: Real, R: Rng>(rng: &mut R, out: &mut [T]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = standard_normal_pair(rng);
        pair[0] = T::of(a);
        pair[1] = T::of(b);
    }
    if let [last] = chunks.into_remainder() {
        let (a, _) = standard_normal_pair(rng);
        *last = T::of(a);
    }
}
