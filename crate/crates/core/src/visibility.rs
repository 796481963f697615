//! Hidden-point removal: a point is visible from a viewpoint when its
//! spherically flipped image is a vertex of the convex hull of all flipped
//! points together with the viewpoint.

use crate::cloud::{norm3, sub, Point};
use crate::hull::convex_hull;

/// Flip radius as a multiple of the largest camera-to-point distance.
pub const DEFAULT_FLIP_FACTOR: f64 = 2.0;

/// Indices of `points` visible from `camera`, or `None` when the flipped set
/// is degenerate (e.g. a coplanar cloud).
pub fn hidden_point_removal(points: &[Point], camera: Point, flip_factor: f64) -> Option<Vec<usize>> {
    if points.len() < 4 {
        return None;
    }
    let rel: Vec<Point> = points.iter().map(|p| sub(p, &camera)).collect();
    let max_dist = rel.iter().map(norm3).fold(0.0, f64::max);
    if !(max_dist > 0.0) {
        return None;
    }
    let radius = flip_factor * max_dist;
    let mut flipped: Vec<Point> = rel
        .iter()
        .map(|q| {
            let n = norm3(q);
            if n > 0.0 {
                let s = 1.0 + 2.0 * (radius - n) / n;
                q.map(|v| v * s)
            } else {
                *q
            }
        })
        .collect();
    flipped.push([0.0; 3]);
    let hull = convex_hull(&flipped)?;
    let camera_index = points.len();
    Some(hull.vertices().into_iter().filter(|&i| i != camera_index).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere(n: usize, seed: u64) -> Vec<Point> {
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

    #[test]
    fn sphere_keeps_the_near_cap() {
        let pts = sphere(400, 3);
        let cam = [0.0, 3.0, 0.0];
        let vis = hidden_point_removal(&pts, cam, DEFAULT_FLIP_FACTOR).unwrap();
        // Exact visibility from distance 3 is the cap y > 1/3, a third of the
        // sphere. HPR overshoots the horizon a little but never reaches the
        // far hemisphere.
        let frac = vis.len() as f64 / pts.len() as f64;
        assert!((0.3..0.5).contains(&frac), "{frac}");
        let lowest = vis.iter().map(|&i| pts[i][1]).fold(f64::INFINITY, f64::min);
        assert!(lowest > 0.0, "kept a point at y = {lowest}");
        let cap = (0..pts.len()).filter(|&i| pts[i][1] > 0.45).count();
        assert_eq!(vis.iter().filter(|&&i| pts[i][1] > 0.45).count(), cap);
    }

    #[test]
    fn too_few_points() {
        assert_eq!(hidden_point_removal(&[[0.0; 3]; 3], [1.0, 0.0, 0.0], 2.0), None);
    }

    proptest! {
        #[test]
        fn translation_invariant(seed in 0u64..50, dx in -5.0f64..5.0, dy in -5.0f64..5.0, dz in -5.0f64..5.0) {
            let pts = sphere(60, seed);
            let cam = [2.5, -1.0, 0.5];
            let a = hidden_point_removal(&pts, cam, DEFAULT_FLIP_FACTOR).unwrap();
            let shift = |p: &Point| [p[0] + dx, p[1] + dy, p[2] + dz];
            let moved: Vec<Point> = pts.iter().map(shift).collect();
            let b = hidden_point_removal(&moved, shift(&cam), DEFAULT_FLIP_FACTOR).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
