//! Shared fixtures for the benchmarks.

use densevar::panel::TransformedPanel;
use densevar::simulation::{generate, DgpParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Draws `n` points in `[lo, hi]` from a fixed seed.
pub fn sample_points(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Full-size simulated panel with a strong VAR.
pub fn simulated_panel(seed: u64) -> TransformedPanel {
    generate(&DgpParams {
        alpha_v: 1.0,
        seed,
        ..DgpParams::default()
    })
    .expect("default design is valid")
    .0
}

/// Uniform p-values with a small block of signals at the front.
pub fn pvalues(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|i| {
            let u: f64 = rng.random();
            if i < m / 10 {
                u * 1e-4
            } else {
                u
            }
        })
        .collect()
}
