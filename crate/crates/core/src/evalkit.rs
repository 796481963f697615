//! Confidence scores and open-set metrics.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::diffcore::softmax;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scorer {
    Mls,
    Msp,
}

impl Scorer {
    /// `logits` carries `num_classes + 1` entries; the last is the unknown prototype.
    pub fn score(self, logits: &[f64], num_classes: usize) -> (f64, usize) {
        match self {
            Scorer::Mls => mls_score(logits, num_classes),
            Scorer::Msp => msp_score(logits, num_classes),
        }
    }
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mls" => Ok(Scorer::Mls),
            "msp" => Ok(Scorer::Msp),
            other => Err(Error::Config(format!("unknown scorer `{other}` (expected mls or msp)"))),
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scorer::Mls => "mls",
            Scorer::Msp => "msp",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSample {
    pub confidence: f64,
    pub predicted_class: usize,
    pub is_known: bool,
    pub true_class: Option<usize>,
}

fn known_argmax(values: &[f64], num_classes: usize) -> usize {
    let known = &values[..num_classes.min(values.len())];
    let mut best = 0;
    for (i, v) in known.iter().enumerate() {
        if *v > known[best] {
            best = i;
        }
    }
    best
}

/// Largest known-class logit and its index. The unknown logit is ignored.
pub fn mls_score(logits: &[f64], num_classes: usize) -> (f64, usize) {
    let c = known_argmax(logits, num_classes);
    (logits[c], c)
}

/// Largest known-class probability under a softmax over all logits.
pub fn msp_score(logits: &[f64], num_classes: usize) -> (f64, usize) {
    let p = softmax(logits);
    let c = known_argmax(logits, num_classes);
    (p[c], c)
}

fn check_lists(known: &[f64], unknown: &[f64]) -> Result<()> {
    if known.is_empty() || unknown.is_empty() {
        return Err(Error::Empty("score lists"));
    }
    if known.iter().chain(unknown).any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    Ok(())
}

/// Probability that a known score beats an unknown one, ties counted half.
pub fn auroc(known: &[f64], unknown: &[f64]) -> Result<f64> {
    check_lists(known, unknown)?;
    let mut u = unknown.to_vec();
    u.sort_by(f64::total_cmp);
    // Twice the Mann–Whitney statistic, kept integral so ties stay exact.
    let mut twice: u128 = 0;
    for k in known {
        let below = u.partition_point(|x| x < k);
        let not_above = u.partition_point(|x| x <= k);
        twice += 2 * below as u128 + (not_above - below) as u128;
    }
    Ok(twice as f64 / (2.0 * known.len() as f64 * unknown.len() as f64))
}

/// False-positive rate on unknowns at the largest threshold that keeps at
/// least 95% of known scores at or above it.
pub fn fpr95(known: &[f64], unknown: &[f64]) -> Result<f64> {
    check_lists(known, unknown)?;
    let mut k = known.to_vec();
    k.sort_by(|a, b| b.total_cmp(a));
    let needed = (95 * k.len()).div_ceil(100);
    let t = k[needed - 1];
    let fp = unknown.iter().filter(|s| **s >= t).count();
    Ok(fp as f64 / unknown.len() as f64)
}

/// Overall and class-balanced accuracy.
pub fn acc_macc(predictions: &[usize], labels: &[usize]) -> Result<(f64, f64)> {
    if predictions.len() != labels.len() {
        return Err(Error::shape("acc_macc", "predictions and labels differ in length"));
    }
    if labels.is_empty() {
        return Err(Error::Empty("acc_macc labels"));
    }
    let classes = labels.iter().max().copied().unwrap_or(0) + 1;
    let mut hit = vec![0usize; classes];
    let mut total = vec![0usize; classes];
    for (p, l) in predictions.iter().zip(labels) {
        total[*l] += 1;
        if p == l {
            hit[*l] += 1;
        }
    }
    let correct: usize = hit.iter().sum();
    let acc = correct as f64 / labels.len() as f64;
    let per: Vec<f64> = hit
        .iter()
        .zip(&total)
        .filter(|(_, t)| **t > 0)
        .map(|(h, t)| *h as f64 / *t as f64)
        .collect();
    Ok((acc, per.iter().sum::<f64>() / per.len() as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub auroc: f64,
    pub fpr95: f64,
    pub acc: f64,
    pub macc: f64,
}

/// All four metrics from a scored test set holding both known and unknown samples.
pub fn evaluate(samples: &[ScoredSample]) -> Result<Metrics> {
    let known: Vec<f64> = samples.iter().filter(|s| s.is_known).map(|s| s.confidence).collect();
    let unknown: Vec<f64> = samples.iter().filter(|s| !s.is_known).map(|s| s.confidence).collect();
    let (preds, labels): (Vec<usize>, Vec<usize>) = samples
        .iter()
        .filter(|s| s.is_known)
        .map(|s| {
            s.true_class
                .map(|t| (s.predicted_class, t))
                .ok_or_else(|| Error::InvalidArgument("known sample without a true class".into()))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let (acc, macc) = acc_macc(&preds, &labels)?;
    Ok(Metrics {
        auroc: auroc(&known, &unknown)?,
        fpr95: fpr95(&known, &unknown)?,
        acc,
        macc,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub method: String,
    pub split: String,
    pub metrics: Metrics,
}

pub const METRICS_HEADER: &str = "method,split,auroc,fpr95,acc,macc";

pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[MetricsRow]) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        let m = &r.metrics;
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            r.method, r.split, m.auroc, m.fpr95, m.acc, m.macc
        )?;
    }
    Ok(())
}
