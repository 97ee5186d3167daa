//! Seeded stand-ins for the benchmark datasets: Gaussian blobs, two moons
//! and linear regression with noise.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Matrix, TaskKind};

/// Isotropic Gaussian clusters, `counts[c]` samples of class `c`, centres
/// drawn uniformly from `[lo, hi]^dims`.
pub fn blobs(name: &str, counts: &[usize], dims: usize, spread: f64, bounds: (f64, f64), seed: u64) -> Dataset {
    blobs_with(name, counts, dims, spread, bounds, seed, seed)
}

/// Like [`blobs`], with the centres and the samples drawn from separate
/// seeds so several draws can share one hidden structure.
pub fn blobs_with(
    name: &str,
    counts: &[usize],
    dims: usize,
    spread: f64,
    bounds: (f64, f64),
    centre_seed: u64,
    sample_seed: u64,
) -> Dataset {
    let mut crng = ChaCha8Rng::seed_from_u64(centre_seed);
    let centres: Vec<Vec<f64>> =
        counts.iter().map(|_| (0..dims).map(|_| crng.random_range(bounds.0..bounds.1)).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let noise = Normal::new(0.0, spread).expect("spread is positive");
    let mut rows = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            let x: Vec<f64> = centres[c].iter().map(|m| m + noise.sample(&mut rng)).collect();
            rows.push((x, c as f64));
        }
    }
    rows.shuffle(&mut rng);
    finish(name, TaskKind::Classification, rows)
}

/// Two interleaving half circles with Gaussian jitter.
pub fn moons(name: &str, n: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise).expect("noise is positive");
    let outer = n / 2;
    let inner = n - outer;
    let step = |i: usize, m: usize| PI * i as f64 / (m.max(2) - 1) as f64;
    let mut rows = Vec::with_capacity(n);
    for i in 0..outer {
        let t = step(i, outer);
        rows.push((vec![t.cos() + jitter.sample(&mut rng), t.sin() + jitter.sample(&mut rng)], 0.0));
    }
    for i in 0..inner {
        let t = step(i, inner);
        rows.push((vec![1.0 - t.cos() + jitter.sample(&mut rng), 0.5 - t.sin() + jitter.sample(&mut rng)], 1.0));
    }
    rows.shuffle(&mut rng);
    finish(name, TaskKind::Classification, rows)
}

/// `y = x·w + b + ε` with standard normal features.
pub fn regression(name: &str, n: usize, dims: usize, noise: f64, seed: u64) -> Dataset {
    regression_with(name, n, dims, noise, seed, seed)
}

pub fn regression_with(name: &str, n: usize, dims: usize, noise: f64, coef_seed: u64, sample_seed: u64) -> Dataset {
    let mut coef = ChaCha8Rng::seed_from_u64(coef_seed);
    let w: Vec<f64> = (0..dims).map(|_| coef.random_range(-50.0..50.0)).collect();
    let b = coef.random_range(-10.0..10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let rows = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dims).map(|_| unit.sample(&mut rng)).collect();
            let y = b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + noise * unit.sample(&mut rng);
            (x, y)
        })
        .collect();
    finish(name, TaskKind::Regression, rows)
}

fn finish(name: &str, task: TaskKind, rows: Vec<(Vec<f64>, f64)>) -> Dataset {
    let (x, y): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().unzip();
    let features = Matrix::from_rows(&x).expect("generated rows have equal length");
    Dataset::new(name, task, features, Some(y)).expect("one target per row")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Train,
    Test,
}

/// Names of the nine benchmark-shaped generators.
pub const STAND_INS: [&str; 9] =
    ["iris", "wine", "breast_cancer", "digits", "art_class", "moon", "boston", "diabetes", "art_regr"];

// Stable string hash: a dataset's hidden structure (blob centres, regression
// weights) depends only on its name, so train and test draws agree.
fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// A synthetic dataset with the class counts and dimensionality of the
/// named benchmark. Test variants are fresh draws at 40% of the size and
/// use every row; train variants keep a 60/40 split.
pub fn stand_in(name: &str, variant: Variant, seed: u64) -> Option<Dataset> {
    let (sample_seed, scale) = match variant {
        Variant::Train => (seed, 1.0),
        Variant::Test => (seed ^ 0x9e37_79b9_7f4a_7c15, 0.4),
    };
    let shape = fnv(name);
    let sized = |counts: &[usize]| -> Vec<usize> {
        counts.iter().map(|&c| ((c as f64 * scale).round() as usize).max(2)).collect()
    };
    let total = |n: usize| ((n as f64 * scale).round() as usize).max(4);
    let cls = |counts: &[usize], dims: usize, spread: f64, bounds: (f64, f64)| {
        blobs_with(name, &sized(counts), dims, spread, bounds, shape, sample_seed)
    };
    let mut d = match name {
        "iris" => cls(&[50, 50, 50], 4, 1.2, (0.0, 8.0)),
        "wine" => cls(&[59, 71, 48], 13, 2.0, (0.0, 10.0)),
        "breast_cancer" => cls(&[212, 358], 30, 3.0, (0.0, 10.0)),
        "digits" => {
            let mut d = cls(&[178, 182, 177, 183, 181, 182, 181, 179, 174, 180], 64, 3.0, (0.0, 16.0));
            for i in 0..d.features.rows() {
                for j in 0..d.features.cols() {
                    d.features.set(i, j, d.features.get(i, j).round().clamp(0.0, 16.0));
                }
            }
            d
        }
        "art_class" => {
            let mut d = cls(&[300, 300, 300], 20, 2.5, (-4.0, 4.0));
            d.features.normalize_columns();
            d
        }
        "moon" => {
            let mut d = moons(name, total(500), 0.2, sample_seed);
            d.features.normalize_columns();
            d
        }
        "boston" => regression_with(name, total(506), 13, 5.0, shape, sample_seed),
        "diabetes" => regression_with(name, total(442), 10, 20.0, shape, sample_seed),
        "art_regr" => regression_with(name, total(200), 20, 1.0, shape, sample_seed),
        _ => return None,
    };
    d.provenance = format!("synthetic:{name}:{}:{seed}", if variant == Variant::Train { "train" } else { "test" });
    if variant == Variant::Train {
        d.train_fraction = 0.6;
    }
    Some(d)
}
