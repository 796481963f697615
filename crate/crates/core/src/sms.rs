//! Feature-margin separation: weighted triplet hinge between an object's
//! feature, its high-saliency part and another class, with optional
//! Gaussian pseudo-features substituted for the positive or negative.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diffcore::{Array, Tape, Var};
use crate::encoder::cosine_logits;
use crate::error::{Error, Result};

/// Noise levels, as multiples of the running per-dimension feature std.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule(Vec<f64>);

impl NoiseSchedule {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("noise schedule must be nonempty with finite weights >= 0".into()));
        }
        Ok(Self(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self(vec![0.01, 0.05, 0.1, 0.2])
    }
}

/// Exponential moving estimate of per-dimension feature mean and variance.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStats {
    mean: Vec<f64>,
    var: Vec<f64>,
    momentum: f64,
    seen: bool,
}

impl FeatureStats {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            momentum: 0.9,
            seen: false,
        }
    }

    /// Folds in one batch of features. The first batch replaces the prior.
    pub fn update<'a, I>(&mut self, batch: I)
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = batch.into_iter().collect();
        if rows.is_empty() {
            return;
        }
        let n = rows.len() as f64;
        let dim = self.mean.len();
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let keep = if self.seen { self.momentum } else { 0.0 };
        for k in 0..dim {
            self.mean[k] = keep * self.mean[k] + (1.0 - keep) * mean[k];
            self.var[k] = keep * self.var[k] + (1.0 - keep) * var[k];
        }
        self.seen = true;
    }

    pub fn std(&self) -> Vec<f64> {
        self.var.iter().map(|v| v.sqrt()).collect()
    }
}

/// Draws one candidate `f + N(0, (w·σ)²)` per noise weight, keeps those the
/// head still assigns to `class`, and returns one of them at random.
pub fn pseudo_feature<R: Rng + ?Sized>(
    feature: &[f64],
    schedule: &NoiseSchedule,
    std: &[f64],
    bank: &Array,
    class: usize,
    rng: &mut R,
) -> Result<Option<Vec<f64>>> {
    if std.len() != feature.len() {
        return Err(Error::shape("pseudo_feature", "std length differs from feature length"));
    }
    let mut accepted = Vec::new();
    for &w in schedule.weights() {
        let candidate: Vec<f64> = feature
            .iter()
            .zip(std)
            .map(|(f, s)| {
                let z: f64 = StandardNormal.sample(rng);
                f + w * s * z
            })
            .collect();
        let logits = match cosine_logits(&candidate, bank) {
            Ok(l) => l,
            Err(Error::NormUnderflow(_)) => continue,
            Err(e) => return Err(e),
        };
        if argmax(&logits) == class {
            accepted.push(candidate);
        }
    }
    Ok(accepted.choose(rng).cloned())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Replacement {
    None,
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Triplet<F> {
    pub anchor: F,
    pub positive: F,
    pub negative: F,
    pub replacement: Replacement,
}

/// Assembles `(anchor, high part, other class)`. With probability
/// `p_replace`, and only when a pseudo-feature is available, a fair coin
/// decides whether it replaces the positive or the negative.
pub fn build_triplet<F: Clone, R: Rng + ?Sized>(
    anchor: (F, usize),
    high_part: F,
    negative: (F, usize),
    pseudo: Option<F>,
    p_replace: f64,
    rng: &mut R,
) -> Result<Triplet<F>> {
    if anchor.1 == negative.1 {
        return Err(Error::InvalidArgument(format!(
            "negative must come from a different class than the anchor (both {})",
            anchor.1
        )));
    }
    let mut t = Triplet {
        anchor: anchor.0,
        positive: high_part,
        negative: negative.0,
        replacement: Replacement::None,
    };
    if let Some(p) = pseudo {
        if rng.random_bool(p_replace.clamp(0.0, 1.0)) {
            if rng.random_bool(0.5) {
                t.positive = p;
                t.replacement = Replacement::Positive;
            } else {
                t.negative = p;
                t.replacement = Replacement::Negative;
            }
        }
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginParams {
    /// Weight on the anchor–positive distance.
    pub rho: f64,
    /// Weight on the anchor–negative distance.
    pub eta: f64,
    pub margin: f64,
}

impl Default for MarginParams {
    fn default() -> Self {
        Self {
            rho: 0.01,
            eta: 1.0,
            margin: 10.0,
        }
    }
}

impl MarginParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.eta >= 0.0 && self.margin >= 0.0) {
            return Err(Error::Config("margin weights and margin must be nonnegative".into()));
        }
        if !(self.rho < self.eta) {
            return Err(Error::Config(format!(
                "positive weight must be below negative weight, got rho={} eta={}",
                self.rho, self.eta
            )));
        }
        Ok(())
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `max(0, ρ·d(a, p) − η·d(a, n) + τ)` with Euclidean `d`.
pub fn margin_loss(t: &Triplet<Vec<f64>>, params: &MarginParams) -> Result<f64> {
    let all = t.anchor.iter().chain(&t.positive).chain(&t.negative);
    if all.clone().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("margin_loss features".into()));
    }
    if t.anchor.len() != t.positive.len() || t.anchor.len() != t.negative.len() {
        return Err(Error::shape("margin_loss", "features differ in length"));
    }
    let raw = params.rho * euclid(&t.anchor, &t.positive) - params.eta * euclid(&t.anchor, &t.negative)
        + params.margin;
    Ok(raw.max(0.0))
}

/// Differentiable [`margin_loss`] over recorded features.
pub fn margin_loss_on_tape(tape: &mut Tape, t: &Triplet<Var>, params: &MarginParams) -> Result<Var> {
    for v in [t.anchor, t.positive, t.negative] {
        if !tape.value(v).is_finite() {
            return Err(Error::NonFinite("margin_loss features".into()));
        }
    }
    let dp = tape.distance(t.anchor, t.positive)?;
    let dn = tape.distance(t.anchor, t.negative)?;
    let raw = tape.weighted_sum(&[(dp, params.rho), (dn, -params.eta)], params.margin)?;
    Ok(tape.hinge(raw))
}
