//! Shared fixtures for the benchmarks.

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random embeddings with group labels, shaped like a training batch.
pub fn random_batch(n: usize, dim: usize, n_labels: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embs = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..n_labels)).collect();
    (embs, labels)
}

/// Well-separated gaussian-ish blobs for the clustering benchmarks.
pub fn blobs(n_blobs: usize, per_blob: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..n_blobs)
        .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect();
    let mut out = Vec::with_capacity(n_blobs * per_blob);
    for center in &centers {
        for _ in 0..per_blob {
            out.push(center.iter().map(|&c| c + rng.random_range(-0.2..0.2)).collect());
        }
    }
    out
}
