//! Seeded synthetic point clouds for tests, benchmarks and demos.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::graph::FeatureMatrix;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `n` i.i.d. standard Gaussian points in `d` dimensions.
pub fn gaussian(n: usize, d: usize, seed: u64) -> Result<FeatureMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMatrix::new(n, d, (0..n * d).map(|_| normal(&mut rng)).collect())
}

/// `clusters` isotropic Gaussian blobs with unit spread, centers drawn from
/// `N(0, separation² I)`. Points are assigned to clusters round-robin.
pub fn gaussian_mixture(
    n: usize,
    d: usize,
    clusters: usize,
    separation: f64,
    seed: u64,
) -> Result<(FeatureMatrix, Vec<u32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = clusters.max(1);
    let centers: Vec<f64> = (0..clusters * d)
        .map(|_| separation * normal(&mut rng))
        .collect();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % clusters;
        labels.push(c as u32);
        for t in 0..d {
            data.push(centers[c * d + t] + normal(&mut rng));
        }
    }
    Ok((FeatureMatrix::new(n, d, data)?, labels))
}

/// Two interleaving half circles with Gaussian noise, labels 0 and 1.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> Result<(FeatureMatrix, Vec<u32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outer = n / 2;
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (x, y, label) = if i < outer {
            let t = PI * i as f64 / (outer.max(2) - 1) as f64;
            (t.cos(), t.sin(), 0)
        } else {
            let inner = n - outer;
            let t = PI * (i - outer) as f64 / (inner.max(2) - 1) as f64;
            (1.0 - t.cos(), 0.5 - t.sin(), 1)
        };
        data.push(x + noise * normal(&mut rng));
        data.push(y + noise * normal(&mut rng));
        labels.push(label);
    }
    Ok((FeatureMatrix::new(n, 2, data)?, labels))
}

/// Integer coordinates of a `side × side` lattice, row-major.
pub fn grid(side: usize) -> Result<FeatureMatrix> {
    let data = (0..side * side)
        .flat_map(|i| [(i / side) as f64, (i % side) as f64])
        .collect();
    FeatureMatrix::new(side * side, 2, data)
}

/// A tight cluster next to a diffuse one, labels 0 (dense) and 1 (sparse).
pub fn dense_and_sparse_clusters(
    n_dense: usize,
    n_sparse: usize,
    d: usize,
    seed: u64,
) -> Result<(FeatureMatrix, Vec<u32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity((n_dense + n_sparse) * d);
    let mut labels = Vec::with_capacity(n_dense + n_sparse);
    for _ in 0..n_dense {
        data.extend((0..d).map(|_| 0.1 * normal(&mut rng)));
    }
    labels.resize(n_dense, 0);
    for _ in 0..n_sparse {
        let offset = 6.0;
        data.extend((0..d).map(|t| (if t == 0 { offset } else { 0.0 }) + 2.0 * normal(&mut rng)));
    }
    labels.resize(n_dense + n_sparse, 1);
    Ok((FeatureMatrix::new(n_dense + n_sparse, d, data)?, labels))
}

/// Uniform points in the unit cube.
pub fn uniform(n: usize, d: usize, seed: u64) -> Result<FeatureMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMatrix::new(n, d, (0..n * d).map(|_| rng.random::<f64>()).collect())
}
