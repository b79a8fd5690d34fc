//! Seeded counter-based randomness. No global entropy is ever used.

use crate::operator::{c64, DiscreteOperator};
use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

/// Generator for `seed`, on stream `stream`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn complex_normal(rng: &mut ChaCha8Rng) -> c64 {
    c64::new(normal(rng), normal(rng)) * std::f64::consts::FRAC_1_SQRT_2
}

/// Dense complex Gaussian matrix.
pub fn gaussian_operator(rng: &mut ChaCha8Rng, n: usize) -> DiscreteOperator {
    let vals: Vec<c64> = (0..n * n).map(|_| complex_normal(rng)).collect();
    DiscreteOperator::from_fn(n, |i, j| vals[i * n + j])
}

/// Random real symmetric matrix with Gaussian entries.
pub fn symmetric_operator(rng: &mut ChaCha8Rng, n: usize) -> DiscreteOperator {
    let g = gaussian_operator(rng, n);
    let re = DiscreteOperator::from_fn(n, |i, j| c64::new(g.get(i, j).re, 0.0));
    re.symmetrized()
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
