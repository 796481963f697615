//! Two-phase optimisation: closed-set pretraining on known classes, then
//! training with the part, synthesis and margin terms added.

mod config;

pub use config::{TrainConfig, TRAIN_KEYS};

use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::dataio::{Dataset, SaliencyCache, Split};
use crate::diffcore::{Array, ParamStore, Tape, Var};
use crate::encoder::Model;
use crate::error::{Error, Result};
use crate::evalkit::{acc_macc, evaluate, Metrics, ScoredSample, Scorer};
use crate::gss::{mix, LowPart, MixConfig, SoftLabel, SyntheticSample};
use crate::seeding::{stream_id, stream_rng};
use crate::sms::{build_triplet, margin_loss_on_tape, pseudo_feature, FeatureStats, Triplet};
use crate::tsd::{partial_views, saliency_map, tunable_decompose, PartialView, SaliencyMap};

const STREAM_SHUFFLE: u64 = 1;
const STREAM_PLAN: u64 = 2;
const STREAM_VIEWS: u64 = 3;

/// Cross-entropy of `logits` (length `C + 1`) against known class `class`.
pub fn cls_loss(logits: &[f64], class: usize) -> Result<f64> {
    let c = logits.len().saturating_sub(1);
    if class >= c {
        return Err(Error::InvalidArgument(format!(
            "class {class} is not a known class (C = {c}); the unknown label is reserved for synthetic samples"
        )));
    }
    Ok(-crate::diffcore::log_softmax(logits)[class])
}

/// Classification loss of a high-saliency part under its object's label.
pub fn high_saliency_loss(model: &Model, high_part: &PointCloud, class: usize) -> Result<f64> {
    cls_loss(&model.infer(high_part)?.logits, class)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    pub cls: f64,
    pub high: f64,
    pub synth: f64,
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl LossWeights {
    pub const CLOSED_SET: LossWeights = LossWeights { alpha: 0.0, beta: 0.0, gamma: 0.0 };
}

pub fn total_loss(t: &LossTerms, w: &LossWeights) -> f64 {
    t.cls + w.alpha * t.high + w.beta * t.synth + w.gamma * t.margin
}

/// Adaptive moment estimation with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Array>,
    v: Vec<Array>,
}

impl Adam {
    pub fn new(params: &ParamStore) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &[Array], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.values_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let (p, g, m, v) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Cosine decay from `lr0` at epoch 0 towards 0 at `total`.
pub fn cosine_lr(lr0: f64, epoch: usize, total: usize) -> f64 {
    if total == 0 {
        return lr0;
    }
    0.5 * lr0 * (1.0 + (std::f64::consts::PI * epoch as f64 / total as f64).cos())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub terms: LossTerms,
    pub total: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
    /// Total loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
}

pub const REPORT_HEADER: &str = "epoch,l_cls,l_h,l_s,l_m,total,val_acc";

impl TrainReport {
    pub fn extend(&mut self, other: TrainReport) {
        let offset = self.rows.len();
        self.rows.extend(other.rows.into_iter().map(|mut r| {
            r.epoch += offset;
            r
        }));
        self.step_losses.extend(other.step_losses);
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for r in &self.rows {
            let t = &r.terms;
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.epoch, t.cls, t.high, t.synth, t.margin, r.total, r.val_acc
            );
        }
        out
    }
}

/// A feature taking part in a triplet.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureRef {
    /// Global feature of batch item `i`.
    Object(usize),
    /// Global feature of item `i`'s high-saliency part.
    High(usize),
    /// Detached synthetic feature.
    Pseudo(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
enum PlannedTriplet {
    /// Resolved on first evaluation, once the anchor's feature is known.
    Pending { anchor: usize, negative: usize, seed: u64 },
    Ready(Triplet<FeatureRef>),
}

#[derive(Clone, Debug, PartialEq)]
struct PlannedItem {
    cloud: PointCloud,
    class: usize,
    high: Option<PointCloud>,
}

/// Every random decision for one optimizer step. Evaluating a plan twice
/// with the same parameters gives the same loss.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchPlan {
    items: Vec<PlannedItem>,
    synthetic: Vec<SyntheticSample>,
    triplets: Vec<PlannedTriplet>,
    std: Vec<f64>,
    weights: LossWeights,
}

impl BatchPlan {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn synthetic(&self) -> &[SyntheticSample] {
        &self.synthetic
    }

    pub fn high_parts(&self) -> impl Iterator<Item = Option<&PointCloud>> {
        self.items.iter().map(|i| i.high.as_ref())
    }
}

#[derive(Clone, Debug)]
pub struct BatchEval {
    pub terms: LossTerms,
    pub total: f64,
    /// Object features in batch order.
    pub features: Vec<Vec<f64>>,
    /// Gradient of `total` per parameter, indexed like the model's store.
    pub grads: Vec<Array>,
}

struct Recorded {
    tape: Tape,
    total: Var,
    terms: LossTerms,
    features: Vec<Var>,
}

type Progress<'a> = Box<dyn FnMut(&'static str, &EpochRow) + 'a>;

/// Training state over one dataset: the known training objects, their
/// saliency and views, and running feature statistics.
pub struct Trainer<'a> {
    dataset: &'a Dataset,
    config: TrainConfig,
    train: Vec<usize>,
    val: Vec<usize>,
    saliency: Vec<Option<SaliencyMap>>,
    views: Vec<Vec<PartialView>>,
    stats: FeatureStats,
    progress: Option<Progress<'a>>,
}

impl<'a> Trainer<'a> {
    pub fn new(dataset: &'a Dataset, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if dataset.num_classes() < 2 {
            return Err(Error::Config("training needs at least 2 known classes".into()));
        }
        let pick = |split| -> Vec<usize> {
            (0..dataset.samples.len())
                .filter(|&i| dataset.samples[i].split == split && dataset.samples[i].label().is_some())
                .collect()
        };
        let train = pick(Split::Train);
        if train.len() < 2 {
            return Err(Error::Config("training split has fewer than 2 known objects".into()));
        }
        let n = train.len();
        Ok(Self {
            dataset,
            stats: FeatureStats::new(config.feature_dim),
            config,
            val: pick(Split::Val),
            saliency: vec![None; n],
            views: vec![Vec::new(); n],
            train,
            progress: None,
        })
    }

    pub fn with_progress(mut self, f: impl FnMut(&'static str, &EpochRow) + 'a) -> Self {
        self.progress = Some(Box::new(f));
        self
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Dataset indices of the known training objects, in training order.
    pub fn train_objects(&self) -> &[usize] {
        &self.train
    }

    /// Loads saliency for every training object, refusing entries produced
    /// by a model other than `model_checksum`.
    pub fn attach_saliency(&mut self, cache: &SaliencyCache, model_checksum: &str) -> Result<()> {
        for (pos, &i) in self.train.iter().enumerate() {
            let raw = cache.get(&self.dataset.samples[i].id, model_checksum)?;
            if raw.len() != self.dataset.samples[i].cloud.len() {
                return Err(Error::shape("attach_saliency", format!("{} scores for {}", raw.len(), self.dataset.samples[i].id)));
            }
            self.saliency[pos] = Some(SaliencyMap::from_raw(raw.to_vec()));
        }
        self.rebuild_views()
    }

    /// Recomputes saliency with `model`.
    pub fn refresh_saliency(&mut self, model: &Model) -> Result<()> {
        for (pos, &i) in self.train.iter().enumerate() {
            let s = &self.dataset.samples[i];
            let class = s.label().expect("training objects are known");
            self.saliency[pos] = Some(saliency_map(model, &s.cloud, class)?);
        }
        self.rebuild_views()
    }

    /// View geometry is drawn once per run; scores follow the current saliency.
    fn rebuild_views(&mut self) -> Result<()> {
        if !self.config.tsd || self.config.views.count == 0 {
            return Ok(());
        }
        for pos in 0..self.train.len() {
            let cloud = &self.dataset.samples[self.train[pos]].cloud;
            let sal = self.saliency[pos].as_ref().expect("saliency attached");
            if self.views[pos].is_empty() {
                let mut rng = stream_rng(self.config.seed, stream_id(&[STREAM_VIEWS, pos as u64]));
                self.views[pos] = partial_views(cloud, sal, &self.config.views, &mut rng)?;
            } else {
                for v in &mut self.views[pos] {
                    v.overall_score = v.indices.iter().map(|&k| sal.normalized[k]).sum::<f64>() / v.indices.len() as f64;
                }
            }
        }
        Ok(())
    }

    /// Draws the random decisions for one step over training positions `batch`.
    pub fn plan_batch(&self, batch: &[usize], weights: LossWeights, rng: &mut ChaCha8Rng) -> Result<BatchPlan> {
        let cfg = &self.config;
        let need_high = weights.alpha > 0.0 || weights.gamma > 0.0;
        let need_low = weights.beta > 0.0;
        let mut items = Vec::with_capacity(batch.len());
        let mut lows = Vec::new();
        for &pos in batch {
            let sample = &self.dataset.samples[self.train[pos]];
            let class = sample.label().expect("training objects are known");
            let mut item = PlannedItem { cloud: sample.cloud.clone(), class, high: None };
            if need_high || need_low {
                let parts = if cfg.tsd {
                    let sal = self.saliency[pos]
                        .as_ref()
                        .ok_or_else(|| Error::NotFound(format!("saliency for {}", sample.id)))?;
                    tunable_decompose(sal, cfg.mix_count, cfg.thresholds, &self.views[pos], rng)?
                } else {
                    let raw: Vec<f64> = (0..sample.cloud.len()).map(|_| rng.random()).collect();
                    tunable_decompose(&SaliencyMap::from_raw(raw), cfg.mix_count, cfg.thresholds, &[], rng)?
                };
                if need_high {
                    item.high = Some(parts.high_cloud(&sample.cloud));
                }
                if need_low {
                    lows.push(LowPart { object_id: self.train[pos], class, cloud: parts.low_cloud(&sample.cloud) });
                }
            }
            items.push(item);
        }

        let mut synthetic = Vec::new();
        if need_low && lows.len() >= cfg.mix_count {
            let count = (cfg.synth_ratio * batch.len() as f64).round() as usize;
            let mix_cfg = MixConfig {
                num_classes: self.dataset.num_classes(),
                smoothing: cfg.smoothing.clone(),
                transforms: cfg.transforms.clone(),
            };
            let n_out = items[0].cloud.len();
            for _ in 0..count {
                let chosen: Vec<LowPart> =
                    index::sample(rng, lows.len(), cfg.mix_count).iter().map(|k| lows[k].clone()).collect();
                synthetic.push(mix(&chosen, n_out, &mix_cfg, rng)?);
            }
        }

        let mut triplets = Vec::new();
        if weights.gamma > 0.0 {
            for a in 0..items.len() {
                let others: Vec<usize> = (0..items.len()).filter(|&b| items[b].class != items[a].class).collect();
                if let Some(&negative) = others.get(rng.random_range(0..others.len().max(1))) {
                    triplets.push(PlannedTriplet::Pending { anchor: a, negative, seed: rng.random() });
                }
            }
        }
        Ok(BatchPlan { items, synthetic, triplets, std: self.stats.std(), weights })
    }

    fn record(&self, model: &Model, plan: &mut BatchPlan) -> Result<Recorded> {
        let w = plan.weights;
        let c = model.num_classes();
        let mut tape = Tape::new();
        let mut features = Vec::with_capacity(plan.items.len());
        let mut cls = Vec::new();
        for item in &plan.items {
            let fw = model.forward(&mut tape, &item.cloud)?;
            features.push(fw.global);
            cls.push(tape.soft_cross_entropy(fw.logits, SoftLabel::one_hot(item.class, c + 1).probs())?);
        }
        let mut high_features = vec![None; plan.items.len()];
        let mut high = Vec::new();
        for (i, item) in plan.items.iter().enumerate() {
            if let Some(part) = &item.high {
                let fw = model.forward(&mut tape, part)?;
                high_features[i] = Some(fw.global);
                if w.alpha > 0.0 {
                    high.push(tape.soft_cross_entropy(fw.logits, SoftLabel::one_hot(item.class, c + 1).probs())?);
                }
            }
        }
        let mut synth = Vec::new();
        if w.beta > 0.0 {
            for s in &plan.synthetic {
                let fw = model.forward(&mut tape, &s.cloud)?;
                synth.push(tape.soft_cross_entropy(fw.logits, s.soft_label.probs())?);
            }
        }
        let mut margin = Vec::new();
        if w.gamma > 0.0 {
            for t in &mut plan.triplets {
                if let PlannedTriplet::Pending { anchor, negative, seed } = *t {
                    let mut rng = stream_rng(seed, 0);
                    let f = tape.value(features[anchor]).data().to_vec();
                    let class = plan.items[anchor].class;
                    let pseudo = pseudo_feature(&f, &self.config.noise, &plan.std, model.prototypes(), class, &mut rng)?;
                    *t = PlannedTriplet::Ready(build_triplet(
                        (FeatureRef::Object(anchor), class),
                        FeatureRef::High(anchor),
                        (FeatureRef::Object(negative), plan.items[negative].class),
                        pseudo.map(FeatureRef::Pseudo),
                        self.config.p_replace,
                        &mut rng,
                    )?);
                }
                let PlannedTriplet::Ready(t) = t else { unreachable!() };
                let mut var = |r: &FeatureRef| -> Result<Var> {
                    match r {
                        FeatureRef::Object(i) => Ok(features[*i]),
                        FeatureRef::High(i) => high_features[*i].ok_or_else(|| Error::NotFound("high part feature".into())),
                        FeatureRef::Pseudo(v) => Ok(tape.input(Array::vector(v.clone()))),
                    }
                };
                let vt = Triplet {
                    anchor: var(&t.anchor)?,
                    positive: var(&t.positive)?,
                    negative: var(&t.negative)?,
                    replacement: t.replacement,
                };
                margin.push(margin_loss_on_tape(&mut tape, &vt, &self.config.margin)?);
            }
        }

        let cls = mean(&mut tape, &cls)?.expect("batch is nonempty");
        let mut total_terms = vec![(cls, 1.0)];
        let mut terms = LossTerms { cls: tape.value(cls).item(), ..LossTerms::default() };
        if let Some(v) = mean(&mut tape, &high)? {
            total_terms.push((v, w.alpha));
            terms.high = tape.value(v).item();
        }
        if let Some(v) = mean(&mut tape, &synth)? {
            total_terms.push((v, w.beta));
            terms.synth = tape.value(v).item();
        }
        if let Some(v) = mean(&mut tape, &margin)? {
            total_terms.push((v, w.gamma));
            terms.margin = tape.value(v).item();
        }
        let total = tape.weighted_sum(&total_terms, 0.0)?;
        Ok(Recorded { tape, total, terms, features })
    }

    /// Loss of a planned batch without gradients.
    pub fn batch_loss(&self, model: &Model, plan: &mut BatchPlan) -> Result<f64> {
        let r = self.record(model, plan)?;
        Ok(r.tape.value(r.total).item())
    }

    /// Loss and parameter gradient of a planned batch.
    pub fn batch_eval(&self, model: &Model, plan: &mut BatchPlan) -> Result<BatchEval> {
        let r = self.record(model, plan)?;
        let grads = r.tape.backward(r.total)?;
        let mut acc = model.params().zeros_like();
        grads.accumulate_params(&r.tape, &mut acc, 1.0);
        Ok(BatchEval {
            terms: r.terms,
            total: r.tape.value(r.total).item(),
            features: r.features.iter().map(|v| r.tape.value(*v).data().to_vec()).collect(),
            grads: acc,
        })
    }

    /// Runs `epochs` epochs with a fresh optimizer and a cosine schedule.
    pub fn run(&mut self, model: &mut Model, epochs: usize, weights: LossWeights, phase: &'static str) -> Result<TrainReport> {
        let refresh = self.config.refresh_saliency && self.config.tsd && weights != LossWeights::CLOSED_SET;
        let phase_tag = if phase == "pretrain" { 1 } else { 2 };
        let mut adam = Adam::new(model.params());
        let mut report = TrainReport::default();
        for epoch in 0..epochs {
            if refresh {
                self.refresh_saliency(model)?;
            }
            let lr = cosine_lr(self.config.lr, epoch, epochs);
            let mut order: Vec<usize> = (0..self.train.len()).collect();
            order.shuffle(&mut stream_rng(self.config.seed, stream_id(&[STREAM_SHUFFLE, epoch as u64])));
            let mut sum = LossTerms::default();
            let mut sum_total = 0.0;
            let mut steps = 0usize;
            for (step, batch) in order.chunks(self.config.batch_size).enumerate() {
                let mut rng = stream_rng(
                    self.config.seed,
                    stream_id(&[STREAM_PLAN, phase_tag, epoch as u64, step as u64]),
                );
                let mut plan = self.plan_batch(batch, weights, &mut rng)?;
                let eval = self.batch_eval(model, &mut plan)?;
                let t = eval.terms;
                for (name, v) in [("l_cls", t.cls), ("l_h", t.high), ("l_s", t.synth), ("l_m", t.margin), ("total", eval.total)] {
                    if !v.is_finite() {
                        return Err(Error::Diverged { phase, epoch: epoch + 1, term: name });
                    }
                }
                adam.step(model.params_mut(), &eval.grads, lr);
                self.stats.update(eval.features.iter().map(Vec::as_slice));
                sum.cls += t.cls;
                sum.high += t.high;
                sum.synth += t.synth;
                sum.margin += t.margin;
                sum_total += eval.total;
                report.step_losses.push(eval.total);
                steps += 1;
            }
            let k = steps.max(1) as f64;
            let row = EpochRow {
                epoch: epoch + 1,
                terms: LossTerms { cls: sum.cls / k, high: sum.high / k, synth: sum.synth / k, margin: sum.margin / k },
                total: sum_total / k,
                val_acc: self.val_accuracy(model)?,
            };
            if let Some(p) = self.progress.as_mut() {
                p(phase, &row);
            }
            report.rows.push(row);
        }
        Ok(report)
    }

    /// Closed-set accuracy on known validation objects (0 without any).
    pub fn val_accuracy(&self, model: &Model) -> Result<f64> {
        if self.val.is_empty() {
            return Ok(0.0);
        }
        let mut preds = Vec::with_capacity(self.val.len());
        let mut labels = Vec::with_capacity(self.val.len());
        for &i in &self.val {
            let s = &self.dataset.samples[i];
            let (_, p) = Scorer::Mls.score(&model.infer(&s.cloud)?.logits, model.num_classes());
            preds.push(p);
            labels.push(s.label().expect("known"));
        }
        Ok(acc_macc(&preds, &labels)?.0)
    }
}

/// Phase 1: a fresh model trained on known classes with cross-entropy only.
pub fn pretrain(dataset: &Dataset, config: &TrainConfig) -> Result<(Model, TrainReport)> {
    let mut model = Model::new(config.encoder(dataset.num_classes()), config.seed)?;
    let report = continue_closed_set(&mut model, dataset, config, config.pretrain_epochs)?;
    Ok((model, report))
}

/// More closed-set epochs on an existing model.
pub fn continue_closed_set(model: &mut Model, dataset: &Dataset, config: &TrainConfig, epochs: usize) -> Result<TrainReport> {
    check_classes(model, dataset)?;
    Trainer::new(dataset, config.clone())?.run(model, epochs, LossWeights::CLOSED_SET, "pretrain")
}

/// Grad-CAM saliency of every known training object under `model`.
pub fn cache_saliency(model: &Model, dataset: &Dataset) -> Result<SaliencyCache> {
    check_classes(model, dataset)?;
    let checksum = model.to_checkpoint().checksum();
    let mut cache = SaliencyCache::new();
    for s in dataset.known(Split::Train) {
        let class = s.label().expect("known");
        cache.put(&s.id, saliency_map(model, &s.cloud, class)?.raw, &checksum)?;
    }
    Ok(cache)
}

fn mean(tape: &mut Tape, terms: &[Var]) -> Result<Option<Var>> {
    if terms.is_empty() {
        return Ok(None);
    }
    let k = 1.0 / terms.len() as f64;
    let pairs: Vec<(Var, f64)> = terms.iter().map(|v| (*v, k)).collect();
    tape.weighted_sum(&pairs, 0.0).map(Some)
}

fn check_classes(model: &Model, dataset: &Dataset) -> Result<()> {
    if model.num_classes() != dataset.num_classes() {
        return Err(Error::Config(format!(
            "model has {} known classes, dataset has {}",
            model.num_classes(),
            dataset.num_classes()
        )));
    }
    Ok(())
}

/// Phase 2 from a pretrained model. `cache` must hold saliency computed by
/// exactly this model unless saliency is refreshed online or disabled.
pub fn train_sasep(model: &mut Model, dataset: &Dataset, config: &TrainConfig, cache: Option<&SaliencyCache>) -> Result<TrainReport> {
    check_classes(model, dataset)?;
    let weights = LossWeights { alpha: config.alpha, beta: config.beta, gamma: config.gamma };
    let mut trainer = Trainer::new(dataset, config.clone())?;
    if config.tsd && weights != LossWeights::CLOSED_SET {
        match cache {
            Some(c) => trainer.attach_saliency(c, &model.to_checkpoint().checksum())?,
            None if config.refresh_saliency => trainer.refresh_saliency(model)?,
            None => return Err(Error::NotFound("saliency cache".into())),
        }
    }
    trainer.run(model, config.epochs, weights, "train")
}

/// Both phases end to end with saliency cached in between.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(Model, TrainReport)> {
    let (mut model, mut report) = pretrain(dataset, config)?;
    let cache = cache_saliency(&model, dataset)?;
    report.extend(train_sasep(&mut model, dataset, config, Some(&cache))?);
    Ok((model, report))
}

/// Scores every known and unknown object in `split`.
pub fn score_split(model: &Model, dataset: &Dataset, split: Split, scorer: Scorer) -> Result<Vec<(String, ScoredSample)>> {
    check_classes(model, dataset)?;
    dataset
        .samples
        .iter()
        .filter(|s| s.split == split)
        .map(|s| {
            let (confidence, predicted_class) = scorer.score(&model.infer(&s.cloud)?.logits, model.num_classes());
            Ok((
                s.id.clone(),
                ScoredSample { confidence, predicted_class, is_known: s.label().is_some(), true_class: s.label() },
            ))
        })
        .collect()
}

pub fn evaluate_split(model: &Model, dataset: &Dataset, split: Split, scorer: Scorer) -> Result<Metrics> {
    let scored: Vec<ScoredSample> = score_split(model, dataset, split, scorer)?.into_iter().map(|(_, s)| s).collect();
    evaluate(&scored)
}

#[cfg(test)]
mod tests;
