//! Incremental 3D convex hull.

use std::collections::HashSet;

use crate::cloud::{cross, dot3, norm3, sub, Point};

/// Closed triangulated hull. Faces are wound counter-clockwise seen from
/// outside.
#[derive(Clone, Debug)]
pub struct ConvexHull {
    pub faces: Vec<[usize; 3]>,
}

impl ConvexHull {
    /// Sorted, deduplicated indices of the input points that are hull
    /// vertices.
    pub fn vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.faces.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Clone, Debug)]
struct Face {
    v: [usize; 3],
    normal: Point,
    offset: f64,
}

impl Face {
    fn new(points: &[Point], v: [usize; 3]) -> Self {
        let n = cross(&sub(&points[v[1]], &points[v[0]]), &sub(&points[v[2]], &points[v[0]]));
        let len = norm3(&n);
        let normal = if len > 0.0 { n.map(|x| x / len) } else { n };
        Self {
            v,
            normal,
            offset: dot3(&normal, &points[v[0]]),
        }
    }

    fn height(&self, p: &Point) -> f64 {
        dot3(&self.normal, p) - self.offset
    }
}

/// Computes the convex hull, or `None` when fewer than four points are given
/// or all points are (numerically) coplanar.
pub fn convex_hull(points: &[Point]) -> Option<ConvexHull> {
    if points.len() < 4 {
        return None;
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let scale = norm3(&sub(&hi, &lo));
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let eps = 1e-10 * scale;

    let seed = initial_simplex(points, eps)?;
    let interior = {
        let mut c = [0.0; 3];
        for &i in &seed {
            for k in 0..3 {
                c[k] += points[i][k] / 4.0;
            }
        }
        c
    };
    let mut faces: Vec<Face> = [
        [seed[0], seed[1], seed[2]],
        [seed[0], seed[1], seed[3]],
        [seed[0], seed[2], seed[3]],
        [seed[1], seed[2], seed[3]],
    ]
    .into_iter()
    .map(|v| {
        let f = Face::new(points, v);
        if f.height(&interior) > 0.0 {
            Face::new(points, [v[0], v[2], v[1]])
        } else {
            f
        }
    })
    .collect();

    let mut visible = Vec::new();
    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    for (pi, p) in points.iter().enumerate() {
        if seed.contains(&pi) {
            continue;
        }
        visible.clear();
        visible.extend((0..faces.len()).filter(|&f| faces[f].height(p) > eps));
        if visible.is_empty() {
            continue;
        }
        edges.clear();
        for &f in &visible {
            let v = faces[f].v;
            for e in 0..3 {
                edges.insert((v[e], v[(e + 1) % 3]));
            }
        }
        let mut horizon: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| !edges.contains(&(b, a)))
            .collect();
        horizon.sort_unstable();
        // Remove visible faces back to front so indices stay valid.
        for &f in visible.iter().rev() {
            faces.swap_remove(f);
        }
        faces.extend(horizon.into_iter().map(|(a, b)| Face::new(points, [a, b, pi])));
    }
    Some(ConvexHull {
        faces: faces.into_iter().map(|f| f.v).collect(),
    })
}

fn initial_simplex(points: &[Point], eps: f64) -> Option<[usize; 4]> {
    let a = (0..points.len())
        .min_by(|&i, &j| points[i][0].total_cmp(&points[j][0]))
        .unwrap_or(0);
    let b = argmax(points, |p| norm3(&sub(p, &points[a])))?;
    if norm3(&sub(&points[b], &points[a])) <= eps {
        return None;
    }
    let ab = sub(&points[b], &points[a]);
    let ab_len = norm3(&ab);
    let line_dist = |p: &Point| norm3(&cross(&ab, &sub(p, &points[a]))) / ab_len;
    let c = argmax(points, line_dist)?;
    if line_dist(&points[c]) <= eps {
        return None;
    }
    let n = cross(&ab, &sub(&points[c], &points[a]));
    let n_len = norm3(&n);
    let plane_dist = |p: &Point| (dot3(&n, &sub(p, &points[a])) / n_len).abs();
    let d = argmax(points, plane_dist)?;
    if plane_dist(&points[d]) <= eps {
        return None;
    }
    Some([a, b, c, d])
}

fn argmax(points: &[Point], f: impl Fn(&Point) -> f64) -> Option<usize> {
    let mut best = None;
    let mut best_val = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let v = f(p);
        if v > best_val {
            best_val = v;
            best = Some(i);
        }
    }
    best
}
