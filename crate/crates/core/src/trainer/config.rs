use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::gss::{LabelSmoothing, TransformParams};
use crate::kv::KvDoc;
use crate::sms::{MarginParams, NoiseSchedule};
use crate::tsd::{ViewConfig, ViewThresholds};

/// Everything that shapes a training run. Loss weights, optimizer settings
/// and module hyperparameters share one flat namespace in config files.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub point_widths: Vec<usize>,
    pub feature_dim: usize,

    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lr: f64,
    pub pretrain_epochs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,

    /// When false, parts come from random scores and no views are used.
    pub tsd: bool,
    pub mix_count: usize,
    pub thresholds: ViewThresholds,
    /// `views.count == 0` disables partial views.
    pub views: ViewConfig,
    /// Recompute saliency with the current model at every phase-2 epoch.
    pub refresh_saliency: bool,

    pub smoothing: LabelSmoothing,
    /// Synthetic samples per real sample in a batch.
    pub synth_ratio: f64,
    pub transforms: TransformParams,

    pub noise: NoiseSchedule,
    pub margin: MarginParams,
    pub p_replace: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let enc = EncoderConfig::default();
        Self {
            point_widths: enc.point_widths,
            feature_dim: enc.feature_dim,
            alpha: 0.1,
            beta: 0.01,
            gamma: 0.3,
            lr: 1e-3,
            pretrain_epochs: 100,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            tsd: true,
            mix_count: 3,
            thresholds: ViewThresholds::default(),
            views: ViewConfig::default(),
            refresh_saliency: false,
            smoothing: LabelSmoothing::default(),
            synth_ratio: 1.0,
            transforms: TransformParams::default(),
            noise: NoiseSchedule::default(),
            margin: MarginParams::default(),
            p_replace: 0.5,
        }
    }
}

pub const TRAIN_KEYS: &[&str] = &[
    "model.point_widths",
    "model.feature_dim",
    "train.alpha",
    "train.beta",
    "train.gamma",
    "train.lr",
    "train.pretrain_epochs",
    "train.epochs",
    "train.batch_size",
    "train.seed",
    "train.refresh_saliency",
    "tsd.enabled",
    "tsd.mix_count",
    "tsd.tau_h",
    "tsd.tau_l",
    "tsd.views",
    "tsd.radius_min",
    "tsd.radius_max",
    "gss.epsilon",
    "gss.epsilon_h",
    "gss.ratio",
    "sms.noise",
    "sms.rho",
    "sms.eta",
    "sms.tau_m",
    "sms.p_replace",
];

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

impl TrainConfig {
    pub fn encoder(&self, num_classes: usize) -> EncoderConfig {
        EncoderConfig {
            point_widths: self.point_widths.clone(),
            feature_dim: self.feature_dim,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder(1).validate()?;
        nonneg("alpha", self.alpha)?;
        nonneg("beta", self.beta)?;
        nonneg("gamma", self.gamma)?;
        nonneg("synth ratio", self.synth_ratio)?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        if self.mix_count < 2 {
            return Err(Error::Config("mix count must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.p_replace) {
            return Err(Error::Config("replacement probability must lie in [0, 1]".into()));
        }
        self.thresholds.validate()?;
        if !(self.thresholds.high > self.thresholds.low) {
            return Err(Error::Config(format!(
                "tau_h must exceed tau_l, got tau_h={} tau_l={}",
                self.thresholds.high, self.thresholds.low
            )));
        }
        if self.views.count > 0
            && !(self.views.radius_min > 0.0 && self.views.radius_max >= self.views.radius_min)
        {
            return Err(Error::Config("view radius range must be positive and ordered".into()));
        }
        self.smoothing.validate()?;
        self.margin.validate()?;
        Ok(())
    }

    /// Reads the keys listed in [`TRAIN_KEYS`], keeping defaults for the rest.
    /// Keys outside that list are left for the caller to judge.
    pub fn from_doc(doc: &KvDoc) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            point_widths: doc.list("model.point_widths")?.unwrap_or(d.point_widths),
            feature_dim: doc.parsed_or("model.feature_dim", d.feature_dim)?,
            alpha: doc.parsed_or("train.alpha", d.alpha)?,
            beta: doc.parsed_or("train.beta", d.beta)?,
            gamma: doc.parsed_or("train.gamma", d.gamma)?,
            lr: doc.parsed_or("train.lr", d.lr)?,
            pretrain_epochs: doc.parsed_or("train.pretrain_epochs", d.pretrain_epochs)?,
            epochs: doc.parsed_or("train.epochs", d.epochs)?,
            batch_size: doc.parsed_or("train.batch_size", d.batch_size)?,
            seed: doc.parsed_or("train.seed", d.seed)?,
            refresh_saliency: doc.parsed_or("train.refresh_saliency", d.refresh_saliency)?,
            tsd: doc.parsed_or("tsd.enabled", d.tsd)?,
            mix_count: doc.parsed_or("tsd.mix_count", d.mix_count)?,
            thresholds: ViewThresholds {
                high: doc.parsed_or("tsd.tau_h", d.thresholds.high)?,
                low: doc.parsed_or("tsd.tau_l", d.thresholds.low)?,
            },
            views: ViewConfig {
                count: doc.parsed_or("tsd.views", d.views.count)?,
                radius_min: doc.parsed_or("tsd.radius_min", d.views.radius_min)?,
                radius_max: doc.parsed_or("tsd.radius_max", d.views.radius_max)?,
                ..d.views
            },
            smoothing: LabelSmoothing {
                base: doc.parsed_or("gss.epsilon", d.smoothing.base)?,
                source: doc.parsed_or("gss.epsilon_h", d.smoothing.source)?,
            },
            synth_ratio: doc.parsed_or("gss.ratio", d.synth_ratio)?,
            transforms: d.transforms,
            noise: match doc.list::<f64>("sms.noise")? {
                Some(w) => NoiseSchedule::new(w)?,
                None => d.noise,
            },
            margin: MarginParams {
                rho: doc.parsed_or("sms.rho", d.margin.rho)?,
                eta: doc.parsed_or("sms.eta", d.margin.eta)?,
                margin: doc.parsed_or("sms.tau_m", d.margin.margin)?,
            },
            p_replace: doc.parsed_or("sms.p_replace", d.p_replace)?,
        };
        c.validate()?;
        Ok(c)
    }

    /// Inverse of [`TrainConfig::from_doc`].
    pub fn to_doc(&self) -> KvDoc {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut doc = KvDoc::default();
        doc.set(
            "model.point_widths",
            self.point_widths.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        );
        doc.set("model.feature_dim", self.feature_dim);
        doc.set("train.alpha", self.alpha);
        doc.set("train.beta", self.beta);
        doc.set("train.gamma", self.gamma);
        doc.set("train.lr", self.lr);
        doc.set("train.pretrain_epochs", self.pretrain_epochs);
        doc.set("train.epochs", self.epochs);
        doc.set("train.batch_size", self.batch_size);
        doc.set("train.seed", self.seed);
        doc.set("train.refresh_saliency", self.refresh_saliency);
        doc.set("tsd.enabled", self.tsd);
        doc.set("tsd.mix_count", self.mix_count);
        doc.set("tsd.tau_h", self.thresholds.high);
        doc.set("tsd.tau_l", self.thresholds.low);
        doc.set("tsd.views", self.views.count);
        doc.set("tsd.radius_min", self.views.radius_min);
        doc.set("tsd.radius_max", self.views.radius_max);
        doc.set("gss.epsilon", self.smoothing.base);
        doc.set("gss.epsilon_h", self.smoothing.source);
        doc.set("gss.ratio", self.synth_ratio);
        doc.set("sms.noise", list(self.noise.weights()));
        doc.set("sms.rho", self.margin.rho);
        doc.set("sms.eta", self.margin.eta);
        doc.set("sms.tau_m", self.margin.margin);
        doc.set("sms.p_replace", self.p_replace);
        doc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.alpha, c.beta, c.gamma), (0.1, 0.01, 0.3));
        let doc = c.to_doc();
        assert_eq!(TrainConfig::from_doc(&doc).unwrap(), c);
        doc.reject_unknown(TRAIN_KEYS).unwrap();
    }

    #[test]
    fn invariants_are_enforced() {
        let bad = |f: &dyn Fn(&mut TrainConfig)| {
            let mut c = TrainConfig::default();
            f(&mut c);
            assert!(c.validate().is_err());
        };
        bad(&|c| c.alpha = -0.1);
        bad(&|c| c.gamma = f64::NAN);
        bad(&|c| c.margin.rho = 2.0);
        bad(&|c| c.thresholds = ViewThresholds { high: 0.3, low: 0.4 });
        bad(&|c| c.smoothing = LabelSmoothing { base: 0.6, source: 0.5 });
        bad(&|c| c.batch_size = 1);
    }
}
