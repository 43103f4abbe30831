//! Synthetic inputs shared by the benchmarks.

use rand::Rng;

use nullbench_core::models::Matrix;
use nullbench_core::rng::seeded;
use nullbench_core::Dataset;

/// `n` rows of three numerical features, one categorical feature and a
/// binary label that depends on the first feature.
pub fn synthetic(n: usize, seed: u64) -> Dataset {
    let mut rng = seeded(seed);
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    Dataset::builder()
        .numerical("a", a.iter().map(|&v| Some(v)))
        .numerical("b", (0..n).map(|_| Some(rng.random::<f64>())))
        .numerical("c", (0..n).map(|_| Some(rng.random_range(0.0..100.0))))
        .categorical("k", ["x", "y", "z"], (0..n).map(|_| Some(["x", "y", "z"][rng.random_range(0..3)])))
        .target("t", ["no", "yes"], a.iter().map(|&v| (v + rng.random_range(-1.0..1.0) > 0.0) as u8))
        .build()
        .expect("synthetic data is well formed")
}

/// Dense feature matrix with labels from a noisy linear rule.
pub fn features(n: usize, d: usize, seed: u64) -> (Matrix, Vec<u8>) {
    let mut rng = seeded(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y = rows
        .iter()
        .map(|r| (r.iter().take(3).sum::<f64>() + rng.random_range(-0.5..0.5) > 0.0) as u8)
        .collect();
    (Matrix::from_rows(&rows), y)
}
