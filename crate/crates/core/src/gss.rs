//! Pseudo-unknown synthesis: low-saliency parts of several objects are
//! transformed, mixed into one cloud and labeled with a smoothed soft label
//! centred on the unknown class.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::{Point, PointCloud};
use crate::diffcore::log_softmax;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TransformParams {
    pub scale_min: f64,
    pub scale_max: f64,
    pub rotate: bool,
    pub max_offset: f64,
    pub jitter_sigma: f64,
    pub jitter_clip: f64,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self {
            scale_min: 0.8,
            scale_max: 1.2,
            rotate: true,
            max_offset: 0.2,
            jitter_sigma: 0.01,
            jitter_clip: 0.05,
        }
    }
}

impl TransformParams {
    pub fn identity() -> Self {
        Self {
            scale_min: 1.0,
            scale_max: 1.0,
            rotate: false,
            max_offset: 0.0,
            jitter_sigma: 0.0,
            jitter_clip: 0.0,
        }
    }
}

/// The rigid-plus-scale part of a sampled transform; jitter is not recorded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AppliedTransform {
    pub scale: f64,
    /// Rotation about the z (up) axis, radians.
    pub angle: f64,
    pub offset: Point,
}

impl AppliedTransform {
    pub fn apply(&self, p: &Point) -> Point {
        let (s, c) = self.angle.sin_cos();
        let (x, y, z) = (p[0] * self.scale, p[1] * self.scale, p[2] * self.scale);
        [c * x - s * y + self.offset[0], s * x + c * y + self.offset[1], z + self.offset[2]]
    }

    pub fn invert(&self, q: &Point) -> Point {
        let (s, c) = self.angle.sin_cos();
        let (x, y, z) = (q[0] - self.offset[0], q[1] - self.offset[1], q[2] - self.offset[2]);
        [(c * x + s * y) / self.scale, (-s * x + c * y) / self.scale, z / self.scale]
    }
}

/// Scale, rotation about the up axis, translation and clipped Gaussian
/// jitter, applied in that order.
pub fn standard_transforms<R: Rng + ?Sized>(
    part: &PointCloud,
    params: &TransformParams,
    rng: &mut R,
) -> Result<(PointCloud, AppliedTransform)> {
    if part.is_empty() {
        return Err(Error::Empty("standard_transforms"));
    }
    let scale = if params.scale_max > params.scale_min {
        rng.random_range(params.scale_min..params.scale_max)
    } else {
        params.scale_min
    };
    let angle = if params.rotate {
        rng.random_range(0.0..std::f64::consts::TAU)
    } else {
        0.0
    };
    let mut offset = [0.0; 3];
    if params.max_offset > 0.0 {
        for o in &mut offset {
            *o = rng.random_range(-params.max_offset..=params.max_offset);
        }
    }
    let t = AppliedTransform { scale, angle, offset };
    let jitter = (params.jitter_sigma > 0.0)
        .then(|| Normal::new(0.0, params.jitter_sigma).expect("positive sigma"));
    let points = part
        .points
        .iter()
        .map(|p| {
            let mut q = t.apply(p);
            if let Some(n) = &jitter {
                for v in &mut q {
                    *v += n.sample(rng).clamp(-params.jitter_clip, params.jitter_clip);
                }
            }
            q
        })
        .collect();
    Ok((
        PointCloud {
            points,
            label: part.label,
        },
        t,
    ))
}

/// A `(C+1)`-way probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftLabel(Vec<f64>);

impl SoftLabel {
    pub fn one_hot(class: usize, len: usize) -> Self {
        let mut v = vec![0.0; len];
        v[class] = 1.0;
        Self(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelSmoothing {
    /// Base mass spread uniformly over the known classes.
    pub base: f64,
    /// Extra mass shared by the classes that contributed parts.
    pub source: f64,
}

impl Default for LabelSmoothing {
    fn default() -> Self {
        Self { base: 0.1, source: 0.1 }
    }
}

impl LabelSmoothing {
    pub fn validate(&self) -> Result<()> {
        if !(self.base >= 0.0 && self.source >= 0.0 && self.base + self.source < 1.0) {
            return Err(Error::Config(format!(
                "label smoothing needs base >= 0, source >= 0 and base + source < 1, got {} and {}",
                self.base, self.source
            )));
        }
        Ok(())
    }
}

/// Soft label for a mix whose parts came from `counts` (class → number of
/// parts). The unknown class gets `1 - base - source`; every known class
/// gets `base / C`; contributing classes additionally get
/// `source · count / mix_count`.
pub fn pseudo_label(
    counts: &BTreeMap<usize, usize>,
    num_classes: usize,
    smoothing: &LabelSmoothing,
    mix_count: usize,
) -> Result<SoftLabel> {
    smoothing.validate()?;
    if num_classes == 0 {
        return Err(Error::InvalidArgument("need at least one known class".into()));
    }
    let total: usize = counts.values().sum();
    if total != mix_count || mix_count == 0 {
        return Err(Error::InvalidArgument(format!(
            "part counts sum to {total}, expected mix count {mix_count}"
        )));
    }
    let mut probs = vec![smoothing.base / num_classes as f64; num_classes + 1];
    probs[num_classes] = 1.0 - smoothing.base - smoothing.source;
    for (&class, &count) in counts {
        if class >= num_classes {
            return Err(Error::InvalidArgument(format!("source class {class} is not a known class")));
        }
        probs[class] += smoothing.source * count as f64 / mix_count as f64;
    }
    Ok(SoftLabel(probs))
}

/// `-Σ label_i · log softmax(logits)_i`.
pub fn gss_loss(logits: &[f64], label: &SoftLabel) -> Result<f64> {
    if logits.len() != label.0.len() {
        return Err(Error::shape(
            "gss_loss",
            format!("{} logits vs {} label entries", logits.len(), label.0.len()),
        ));
    }
    Ok(-log_softmax(logits)
        .iter()
        .zip(&label.0)
        .map(|(lp, t)| t * lp)
        .sum::<f64>())
}

/// A low-saliency part and the object it was cut from.
#[derive(Clone, Debug, PartialEq)]
pub struct LowPart {
    pub object_id: usize,
    pub class: usize,
    pub cloud: PointCloud,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedPart {
    pub object_id: usize,
    pub class: usize,
    pub transform: AppliedTransform,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSample {
    /// The mixed, resampled and normalized cloud, labeled with the unknown
    /// class.
    pub cloud: PointCloud,
    /// Class → number of parts.
    pub source_classes: BTreeMap<usize, usize>,
    pub soft_label: SoftLabel,
    pub parts: Vec<MixedPart>,
    /// `(part, point)` each output point was drawn from.
    pub origin: Vec<(usize, usize)>,
    /// Center and scale removed by the final normalization.
    pub center: Point,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixConfig {
    pub num_classes: usize,
    pub smoothing: LabelSmoothing,
    pub transforms: TransformParams,
}

/// Transforms each part, unions them and resamples the union to `n_out`
/// points (without replacement when the union is large enough), then
/// normalizes the result.
pub fn mix<R: Rng + ?Sized>(
    parts: &[LowPart],
    n_out: usize,
    config: &MixConfig,
    rng: &mut R,
) -> Result<SyntheticSample> {
    if parts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "mixing needs at least 2 parts, got {}",
            parts.len()
        )));
    }
    let mut ids: Vec<usize> = parts.iter().map(|p| p.object_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != parts.len() {
        return Err(Error::InvalidArgument("mixed parts must come from distinct objects".into()));
    }
    if n_out == 0 {
        return Err(Error::InvalidArgument("output size must be positive".into()));
    }

    let mut union: Vec<Point> = Vec::new();
    let mut union_origin = Vec::new();
    let mut mixed = Vec::with_capacity(parts.len());
    let mut counts = BTreeMap::new();
    for (pi, part) in parts.iter().enumerate() {
        let (cloud, transform) = standard_transforms(&part.cloud, &config.transforms, rng)?;
        union_origin.extend((0..cloud.len()).map(|i| (pi, i)));
        union.extend(cloud.points);
        *counts.entry(part.class).or_insert(0) += 1;
        mixed.push(MixedPart {
            object_id: part.object_id,
            class: part.class,
            transform,
            len: part.cloud.len(),
        });
    }

    let picks: Vec<usize> = if union.len() >= n_out {
        index::sample(rng, union.len(), n_out).into_vec()
    } else {
        let mut all: Vec<usize> = (0..union.len()).collect();
        all.extend((union.len()..n_out).map(|_| rng.random_range(0..union.len())));
        all
    };
    let soft_label = pseudo_label(&counts, config.num_classes, &config.smoothing, parts.len())?;
    let mut cloud = PointCloud::labeled(picks.iter().map(|&i| union[i]).collect(), config.num_classes);
    let (center, scale) = cloud.normalize()?;
    Ok(SyntheticSample {
        cloud,
        source_classes: counts,
        soft_label,
        parts: mixed,
        origin: picks.iter().map(|&i| union_origin[i]).collect(),
        center,
        scale,
    })
}
