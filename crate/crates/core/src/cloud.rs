use crate::diffcore::Array;
use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// An unordered set of 3D points with an optional known-class label.
///
/// Class labels are zero-based: known classes are `0..C` and index `C` is
/// reserved for the unknown class.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub label: Option<usize>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points, label: None }
    }

    pub fn labeled(points: Vec<Point>, label: usize) -> Self {
        Self {
            points,
            label: Some(label),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point {
        let n = self.points.len().max(1) as f64;
        let mut c = [0.0; 3];
        for p in &self.points {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        c.map(|v| v / n)
    }

    /// Largest distance from `center` to any point.
    pub fn radius_about(&self, center: Point) -> f64 {
        self.points
            .iter()
            .map(|p| dist(p, &center))
            .fold(0.0, f64::max)
    }

    /// Centers the cloud at its centroid and scales the farthest point to
    /// distance 1. Returns the `(center, scale)` that was removed.
    pub fn normalize(&mut self) -> Result<(Point, f64)> {
        if self.points.is_empty() {
            return Err(Error::Empty("normalize"));
        }
        let c = self.centroid();
        let r = self.radius_about(c);
        if !r.is_finite() {
            return Err(Error::NonFinite("point coordinates".into()));
        }
        let scale = if r > 0.0 { r } else { 1.0 };
        for p in &mut self.points {
            for k in 0..3 {
                p[k] = (p[k] - c[k]) / scale;
            }
        }
        Ok((c, scale))
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// The points at `indices`, keeping the label.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            label: self.label,
        }
    }

    /// `N×3` coordinate matrix.
    pub fn to_array(&self) -> Array {
        let data = self.points.iter().flat_map(|p| p.iter().copied()).collect();
        Array::new(vec![self.points.len(), 3], data).expect("N×3 layout")
    }
}

pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    sub(a, b).iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm3(a: &Point) -> f64 {
    dot3(a, a).sqrt()
}
