//! Saliency-driven decomposition of an object into high- and low-saliency
//! parts, with optional substitution by thresholded partial views.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cloud::{dot3, norm3, Point, PointCloud};
use crate::diffcore::{Array, Tape};
use crate::encoder::Model;
use crate::error::{Error, Result};
use crate::visibility::{hidden_point_removal, DEFAULT_FLIP_FACTOR};

/// Per-point importance for one object.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    /// ReLU-clamped Grad-CAM scores; used for the sorted split.
    pub raw: Vec<f64>,
    /// `raw` min-max scaled to `[0, 1]`; used for view thresholds.
    pub normalized: Vec<f64>,
}

impl SaliencyMap {
    /// Wraps raw scores and derives the normalized copy. A constant map
    /// normalizes to 0.5 everywhere.
    pub fn from_raw(raw: Vec<f64>) -> Self {
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let normalized = if hi > lo {
            raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
        } else {
            vec![0.5; raw.len()]
        };
        Self { raw, normalized }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Grad-CAM over points: channel weights are the point-averaged gradients,
/// and each point's score is the ReLU of its weighted channel sum.
pub fn grad_cam(features: &Array, gradients: &Array) -> Result<Vec<f64>> {
    if features.shape() != gradients.shape() || features.shape().len() != 2 {
        return Err(Error::shape(
            "grad_cam",
            format!("features {:?} vs gradients {:?}", features.shape(), gradients.shape()),
        ));
    }
    let (n, d) = (features.shape()[0], features.shape()[1]);
    if n == 0 {
        return Err(Error::Empty("grad_cam"));
    }
    let mut weights = vec![0.0; d];
    for i in 0..n {
        for (w, g) in weights.iter_mut().zip(gradients.row(i)) {
            *w += g;
        }
    }
    weights.iter_mut().for_each(|w| *w /= n as f64);
    Ok((0..n)
        .map(|i| {
            let s: f64 = features.row(i).iter().zip(&weights).map(|(a, w)| a * w).sum();
            s.max(0.0)
        })
        .collect())
}

/// Saliency of every point of `cloud` with respect to the logit of `class`.
pub fn saliency_map(model: &Model, cloud: &PointCloud, class: usize) -> Result<SaliencyMap> {
    if class >= model.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "saliency target {class} is not a known class (C = {})",
            model.num_classes()
        )));
    }
    let mut tape = Tape::new();
    let fw = model.forward(&mut tape, cloud)?;
    let target = tape.pick(fw.logits, class)?;
    let grads = tape.backward(target)?;
    let features = tape.value(fw.point_features);
    let raw = match grads.get(fw.point_features) {
        Some(g) => grad_cam(features, g)?,
        None => return Err(Error::NotFound("gradient of per-point features".into())),
    };
    Ok(SaliencyMap::from_raw(raw))
}

/// Index partition produced by the sorted split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    /// The `⌊N / M⌋` lowest-scoring indices, in ascending score order.
    pub low: Vec<usize>,
    /// The remaining indices, in ascending score order.
    pub high: Vec<usize>,
}

/// Sorts points by `(score, index)` and assigns the first `⌊N / mix_count⌋`
/// to the low-saliency part.
pub fn split(scores: &[f64], mix_count: usize) -> Result<Decomposition> {
    if mix_count < 2 {
        return Err(Error::InvalidArgument(format!("mix count must be at least 2, got {mix_count}")));
    }
    let n = scores.len();
    if n < mix_count {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} points into {mix_count} parts"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let high = order.split_off(n / mix_count);
    Ok(Decomposition { low: order, high })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewConfig {
    pub count: usize,
    /// Camera distance range as multiples of the cloud radius.
    pub radius_min: f64,
    pub radius_max: f64,
    pub flip_factor: f64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        Self {
            count: 8,
            radius_min: 1.5,
            radius_max: 4.0,
            flip_factor: DEFAULT_FLIP_FACTOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialView {
    /// Sorted indices of the visible points.
    pub indices: Vec<usize>,
    /// Mean normalized saliency of the visible points.
    pub overall_score: f64,
    /// Set when hidden-point removal was degenerate and the view is a
    /// half-space crop instead.
    pub cropped: bool,
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Point {
    loop {
        let v: Point = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = norm3(&v);
        if n > 1e-12 {
            return v.map(|x| x / n);
        }
    }
}

/// Samples `config.count` camera poses around the cloud and keeps the points
/// visible from each.
pub fn partial_views<R: Rng + ?Sized>(
    cloud: &PointCloud,
    saliency: &SaliencyMap,
    config: &ViewConfig,
    rng: &mut R,
) -> Result<Vec<PartialView>> {
    if config.count == 0 {
        return Err(Error::InvalidArgument("view count must be at least 1".into()));
    }
    if cloud.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "partial views need at least 4 points, got {}",
            cloud.len()
        )));
    }
    if saliency.len() != cloud.len() {
        return Err(Error::shape("partial_views", "saliency length differs from point count"));
    }
    if !(config.radius_min > 0.0 && config.radius_max >= config.radius_min) {
        return Err(Error::InvalidArgument("view radius range must be positive and ordered".into()));
    }
    let center = cloud.centroid();
    let extent = cloud.radius_about(center).max(1e-12);
    let mut views = Vec::with_capacity(config.count);
    for _ in 0..config.count {
        let dir = random_direction(rng);
        let r = rng.random_range(config.radius_min..=config.radius_max) * extent;
        let camera = [center[0] + r * dir[0], center[1] + r * dir[1], center[2] + r * dir[2]];
        let (indices, cropped) = match hidden_point_removal(&cloud.points, camera, config.flip_factor) {
            Some(v) if !v.is_empty() => (v, false),
            _ => (half_space_crop(&cloud.points, center, random_direction(rng)), true),
        };
        let overall_score =
            indices.iter().map(|&i| saliency.normalized[i]).sum::<f64>() / indices.len() as f64;
        views.push(PartialView {
            indices,
            overall_score,
            cropped,
        });
    }
    Ok(views)
}

fn half_space_crop(points: &[Point], center: Point, normal: Point) -> Vec<usize> {
    let side = |p: &Point| dot3(&[p[0] - center[0], p[1] - center[1], p[2] - center[2]], &normal);
    let kept: Vec<usize> = (0..points.len()).filter(|&i| side(&points[i]) >= 0.0).collect();
    if kept.is_empty() {
        (0..points.len()).collect()
    } else {
        kept
    }
}

/// Thresholds steering the decomposition between purely semantic
/// (`high = 1`, `low = 0`) and purely geometric behaviour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewThresholds {
    pub high: f64,
    pub low: f64,
}

impl Default for ViewThresholds {
    fn default() -> Self {
        Self { high: 0.6, low: 0.4 }
    }
}

impl ViewThresholds {
    /// Both thresholds must lie in `[0, 1]`. Their order is not enforced
    /// here: `high < low` is the geometrically focused regime.
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !(unit.contains(&self.high) && unit.contains(&self.low)) {
            return Err(Error::Config(format!(
                "view thresholds must lie in [0, 1], got low={} high={}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

/// Where a part came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartSource {
    Saliency,
    View(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parts {
    pub high: Vec<usize>,
    pub low: Vec<usize>,
    pub high_source: PartSource,
    pub low_source: PartSource,
}

impl Parts {
    pub fn high_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.subset(&self.high)
    }

    pub fn low_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.subset(&self.low)
    }
}

/// Sorted saliency split, with the high part replaced by a random view
/// scoring above `thresholds.high` and the low part by a random view scoring
/// below `thresholds.low`, when such views exist.
pub fn tunable_decompose<R: Rng + ?Sized>(
    saliency: &SaliencyMap,
    mix_count: usize,
    thresholds: ViewThresholds,
    views: &[PartialView],
    rng: &mut R,
) -> Result<Parts> {
    thresholds.validate()?;
    let base = split(&saliency.raw, mix_count)?;
    let pick = |rng: &mut R, pred: &dyn Fn(f64) -> bool| -> Option<usize> {
        let eligible: Vec<usize> = (0..views.len()).filter(|&i| pred(views[i].overall_score)).collect();
        eligible.choose(rng).copied()
    };
    let high_view = pick(rng, &|s| s > thresholds.high);
    let low_view = pick(rng, &|s| s < thresholds.low);
    let (high, high_source) = match high_view {
        Some(v) => (views[v].indices.clone(), PartSource::View(v)),
        None => (base.high, PartSource::Saliency),
    };
    let (low, low_source) = match low_view {
        Some(v) => (views[v].indices.clone(), PartSource::View(v)),
        None => (base.low, PartSource::Saliency),
    };
    Ok(Parts {
        high,
        low,
        high_source,
        low_source,
    })
}
