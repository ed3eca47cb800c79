//! Portable random streams.
//!
//! Every random draw in the crate comes from [`Xoshiro256PlusPlus`], seeded
//! through splitmix64 (`SeedableRng::seed_from_u64`). Independent streams are
//! derived from a base seed and a label with [`stream_seed`]:
//!
//! ```text
//! stream_seed(seed, label) = seed XOR fnv1a64(label)
//! ```
//!
//! Labels used in the crate:
//!
//! * `"<transform-kind>/<image-id>"` for per-image transform draws,
//! * `"toy-image-projection"` and `"toy-text-projection"` for the toy scorer.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a64(s: &str) -> u64 {
    s.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn stream_seed(seed: u64, label: &str) -> u64 {
    seed ^ fnv1a64(label)
}

pub fn stream(seed: u64, label: &str) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(seed, label))
}

/// Uniform draw in `[lo, hi]`; returns `lo` exactly when the range is empty.
pub fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    if hi <= lo {
        lo
    } else {
        lo + (hi - lo) * u
    }
}

/// Row-major `rows x cols` matrix of standard normal draws.
pub fn gaussian_matrix(rng: &mut StreamRng, rows: usize, cols: usize) -> Vec<f32> {
    (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.sample(StandardNormal);
            v as f32
        })
        .collect()
}
