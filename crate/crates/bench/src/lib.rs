//! Seeded inputs shared by the benchmarks under `benches/`.

use osr3d_core::{Point, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points uniform in the cube `[-1, 1]^3`.
pub fn cube_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new((0..n).map(|_| [0; 3].map(|_: i32| rng.random_range(-1.0..1.0))).collect())
}

/// `n` points on the unit sphere.
pub fn sphere_points(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..1.0);
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - z * z).sqrt();
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

/// Interleaved known/unknown confidences with a mild shift between them.
pub fn scores(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let known = i % 2 == 0;
            (rng.random_range(0.0..1.0) + if known { 0.3 } else { 0.0 }, known)
        })
        .unzip()
}
