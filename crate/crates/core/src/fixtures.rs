//! Seeded synthetic suites with planted failure structure, used by the
//! bundled example data, the acceptance suite and the benchmarks.

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{OutcomeLabel, TestCase, TestSuite};

/// Raw range in which `f_1` of a failing test lies in [`planted_cluster_suite`].
pub const PLANTED_F1: (f64, f64) = (7.0, 9.5);
pub const PLANTED_F2: (f64, f64) = (6.0, 9.5);

/// 300 tests with 8 features uniform on `[0, 10]`; a test fails when
/// `f_1 ∈ [7, 9.5]` and `f_2 ∈ [6, 9.5]`.
pub fn planted_cluster_suite(seed: u64) -> TestSuite {
    planted_cluster_suite_sized(seed, 300)
}

pub fn planted_cluster_suite_sized(seed: u64, n: usize) -> TestSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = (0..n)
        .map(|i| {
            let features: Vec<f64> = (0..8).map(|_| round6(rng.random_range(0.0..10.0))).collect();
            let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
            let fails = inside(features[0], PLANTED_F1) && inside(features[1], PLANTED_F2);
            TestCase {
                id: format!("t{:04}", i + 1),
                raw_text: None,
                features,
                outcome: if fails { OutcomeLabel::Effective } else { OutcomeLabel::Ineffective },
                category: None,
            }
        })
        .collect();
    TestSuite::new(cases, (1..=8).map(|j| j.to_string()).collect()).expect("generated suite is valid")
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// A planted fault: tests whose `(f_1, f_2)` fall within `radius` of
/// `centre` trigger it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedFault {
    pub centre: (f64, f64),
    pub radius: f64,
}

/// Twelve faults spread over the positive quadrant of the `(f_1, f_2)`
/// plane at distances 1 to 4 from the origin.
pub fn planted_faults() -> Vec<PlantedFault> {
    (0..12)
        .map(|k| {
            let dist = 1.0 + 3.0 * k as f64 / 11.0;
            let angle = std::f64::consts::FRAC_PI_2 * ((k * 5) % 12) as f64 / 11.0;
            PlantedFault {
                centre: (dist * angle.cos(), dist * angle.sin()),
                radius: 0.45,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DispersionSuite {
    pub suite: TestSuite,
    pub dispersion: f64,
    /// Distinct planted faults triggered by at least one test.
    pub detected_faults: usize,
}

/// `count` suites of `n` tests whose 8 Gaussian features have standard
/// deviation growing linearly from 0.4 in steps of 0.1, all sharing the
/// faults of [`planted_faults`]. Ids are prefixed with the suite index.
pub fn dispersion_series(seed: u64, count: usize, n: usize) -> Vec<DispersionSuite> {
    let faults = planted_faults();
    (0..count)
        .map(|s| {
            let dispersion = 0.4 + 0.1 * s as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(s as u64));
            let normal = Normal::new(0.0, dispersion).expect("positive dispersion");
            let mut hit = vec![false; faults.len()];
            let cases = (0..n)
                .map(|i| {
                    let features: Vec<f64> = (0..8).map(|_| normal.sample(&mut rng)).collect();
                    let mut fails = false;
                    for (k, f) in faults.iter().enumerate() {
                        let (dx, dy) = (features[0] - f.centre.0, features[1] - f.centre.1);
                        if dx * dx + dy * dy < f.radius * f.radius {
                            hit[k] = true;
                            fails = true;
                        }
                    }
                    TestCase {
                        id: format!("s{s:02}-t{i:04}"),
                        raw_text: None,
                        features,
                        outcome: if fails { OutcomeLabel::Effective } else { OutcomeLabel::Ineffective },
                        category: None,
                    }
                })
                .collect();
            DispersionSuite {
                suite: TestSuite::new(cases, (1..=8).map(|j| j.to_string()).collect())
                    .expect("generated suite is valid"),
                dispersion,
                detected_faults: hit.iter().filter(|&&h| h).count(),
            }
        })
        .collect()
}

/// `n` points in the plane, uniform on `[-3, 3]²`, labeled by the side of
/// the line `x₁ + 0.5·x₂ = 1.8` they fall on (about one in five positive).
pub const SEPARABLE_OFFSET: f64 = 1.8;

pub fn separable_pool(seed: u64, n: usize) -> (DMatrix<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, 2);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let a: f64 = rng.random_range(-3.0..3.0);
        let b: f64 = rng.random_range(-3.0..3.0);
        x[(i, 0)] = a;
        x[(i, 1)] = b;
        y.push(a + 0.5 * b > SEPARABLE_OFFSET);
    }
    (x, y)
}

/// Suite whose first feature equals the outcome (balanced) and whose other
/// `noise` features are deterministic pseudo-random noise.
pub fn informative_plus_noise(seed: u64, n: usize, noise: usize) -> (DMatrix<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let x = DMatrix::from_fn(n, noise + 1, |i, j| {
        if j == 0 {
            if y[i] { 1.0 } else { 0.0 }
        } else {
            0.0
        }
    });
    let mut x = x;
    for i in 0..n {
        for j in 1..=noise {
            x[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    (x, y)
}
