//! Seeded inputs shared by the benchmarks.

use instascope_core::Point;
use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_points(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Labels driven by the first two columns so selection has something to find.
pub fn labels_for(x: &DMatrix<f64>) -> Vec<bool> {
    (0..x.nrows()).map(|i| x[(i, 0)] + 0.5 * x[(i, 1)] > 0.3).collect()
}
