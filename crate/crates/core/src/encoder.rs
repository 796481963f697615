//! Point encoder and cosine prototype head.
//!
//! A shared per-point MLP lifts each coordinate to a feature row, a channel
//! max-pool produces an order-independent summary, and a small projection
//! MLP maps that summary to the global feature. Logits are cosine
//! similarities between the global feature and `C + 1` learnable prototypes,
//! the last of which stands for "unknown".

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::PointCloud;
use crate::diffcore::{Array, Checkpoint, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    /// Output widths of the shared per-point layers. The last one is the
    /// width of the per-point feature matrix used for saliency.
    pub point_widths: Vec<usize>,
    /// Global feature dimension `d`.
    pub feature_dim: usize,
    /// Number of known classes `C`.
    pub num_classes: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            point_widths: vec![64, 128, 256],
            feature_dim: 256,
            num_classes: 8,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.point_widths.is_empty() || self.point_widths.contains(&0) {
            return Err(Error::Config("encoder point widths must be nonempty and positive".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("need at least one known class".into()));
        }
        Ok(())
    }

    /// Index of the unknown-class prototype.
    pub fn unknown_class(&self) -> usize {
        self.num_classes
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    weight: ParamId,
    bias: ParamId,
}

/// Encoder and prototype bank with their parameters.
#[derive(Clone, Debug)]
pub struct Model {
    config: EncoderConfig,
    params: ParamStore,
    point_layers: Vec<Layer>,
    projection: [Layer; 2],
    prototypes: ParamId,
}

/// Tape handles produced by a forward pass.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    /// `N×w` per-point features after the last shared layer.
    pub point_features: Var,
    /// `d` global feature.
    pub global: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct Forward {
    pub point_features: Var,
    pub global: Var,
    pub logits: Var,
}

/// Values from a gradient-free pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub global: Vec<f64>,
    pub logits: Vec<f64>,
}

/// `(C+1)×d` bank drawn i.i.d. from `N(0, 1/d)`.
pub fn init_prototypes(num_classes: usize, dim: usize, seed: u64) -> Array {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("positive scale");
    let rows = num_classes + 1;
    let mut data: Vec<f64> = (0..rows * dim).map(|_| normal.sample(&mut rng)).collect();
    for (i, row) in data.chunks_mut(dim).enumerate() {
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n < 1e-8 {
            row.iter_mut().for_each(|v| *v = 0.0);
            row[i % dim] = 1.0;
        }
    }
    Array::matrix(rows, dim, data).expect("bank layout")
}

/// Cosine similarity of `f` with every row of `bank`.
pub fn cosine_logits(f: &[f64], bank: &Array) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let fv = tape.input(Array::vector(f.to_vec()));
    let bv = tape.input(bank.clone());
    let y = tape.cosine_logits(fv, bv)?;
    Ok(tape.value(y).data().to_vec())
}

fn he_uniform(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array {
    let bound = (6.0 / fan_in as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
    Array::matrix(fan_in, fan_out, data).expect("weight layout")
}

impl Model {
    pub fn new(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mut point_layers = Vec::new();
        let mut fan_in = 3;
        for (i, &w) in config.point_widths.iter().enumerate() {
            let weight = params.add(format!("point.{i}.weight"), he_uniform(&mut rng, fan_in, w));
            let bias = params.add(format!("point.{i}.bias"), Array::filled(&[w], 0.01));
            point_layers.push(Layer { weight, bias });
            fan_in = w;
        }
        let d = config.feature_dim;
        let p0 = Layer {
            weight: params.add("proj.0.weight", he_uniform(&mut rng, fan_in, d)),
            bias: params.add("proj.0.bias", Array::filled(&[d], 0.01)),
        };
        let p1 = Layer {
            weight: params.add("proj.1.weight", he_uniform(&mut rng, d, d)),
            bias: params.add("proj.1.bias", Array::zeros(&[d])),
        };
        let proto_seed = rng.random::<u64>();
        let prototypes = params.add("prototypes", init_prototypes(config.num_classes, d, proto_seed));
        Ok(Self {
            config,
            params,
            point_layers,
            projection: [p0, p1],
            prototypes,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn prototypes(&self) -> &Array {
        self.params.get(self.prototypes)
    }

    /// Records the encoder on `tape`.
    pub fn encode(&self, tape: &mut Tape, cloud: &PointCloud) -> Result<Encoded> {
        if cloud.is_empty() {
            return Err(Error::Empty("encode"));
        }
        let mut x = tape.input(cloud.to_array());
        for layer in &self.point_layers {
            let w = tape.param(&self.params, layer.weight);
            let b = tape.param(&self.params, layer.bias);
            x = tape.linear(x, w, b)?;
            x = tape.relu(x);
        }
        let point_features = x;
        let pooled = tape.max_pool_points(point_features)?;
        let [p0, p1] = self.projection;
        let (w, b) = (tape.param(&self.params, p0.weight), tape.param(&self.params, p0.bias));
        let h = tape.linear(pooled, w, b)?;
        let h = tape.relu(h);
        let (w, b) = (tape.param(&self.params, p1.weight), tape.param(&self.params, p1.bias));
        let global = tape.linear(h, w, b)?;
        Ok(Encoded {
            point_features,
            global,
        })
    }

    /// Cosine logits of a recorded global feature against the prototype bank.
    pub fn head(&self, tape: &mut Tape, global: Var) -> Result<Var> {
        let bank = tape.param(&self.params, self.prototypes);
        tape.cosine_logits(global, bank)
    }

    pub fn forward(&self, tape: &mut Tape, cloud: &PointCloud) -> Result<Forward> {
        let enc = self.encode(tape, cloud)?;
        let logits = self.head(tape, enc.global)?;
        Ok(Forward {
            point_features: enc.point_features,
            global: enc.global,
            logits,
        })
    }

    pub fn infer(&self, cloud: &PointCloud) -> Result<Inference> {
        let mut tape = Tape::new();
        let fw = self.forward(&mut tape, cloud)?;
        Ok(Inference {
            global: tape.value(fw.global).data().to_vec(),
            logits: tape.value(fw.logits).data().to_vec(),
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let widths = self
            .config
            .point_widths
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",");
        Checkpoint {
            meta: vec![
                ("encoder.point_widths".into(), widths),
                ("encoder.feature_dim".into(), self.config.feature_dim.to_string()),
                ("encoder.num_classes".into(), self.config.num_classes.to_string()),
            ],
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta = |k: &str| {
            ck.meta_value(k)
                .ok_or_else(|| Error::Config(format!("checkpoint is missing `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            meta(k)?
                .parse()
                .map_err(|_| Error::Config(format!("checkpoint `{k}` is not an integer")))
        };
        let point_widths = meta("encoder.point_widths")?
            .split(',')
            .map(|w| w.trim().parse().map_err(|_| Error::Config(format!("bad width `{w}`"))))
            .collect::<Result<Vec<usize>>>()?;
        let config = EncoderConfig {
            point_widths,
            feature_dim: num("encoder.feature_dim")?,
            num_classes: num("encoder.num_classes")?,
        };
        let mut model = Self::new(config, 0)?;
        for id in model.params.ids().collect::<Vec<_>>() {
            let name = model.params.iter().nth(id.index()).map(|(n, _)| n.to_string()).expect("id in range");
            let src = ck
                .params
                .id(&name)
                .map(|i| ck.params.get(i))
                .ok_or_else(|| Error::Config(format!("checkpoint is missing parameter `{name}`")))?;
            if src.shape() != model.params.get(id).shape() {
                return Err(Error::Config(format!(
                    "parameter `{name}` has shape {:?}, expected {:?}",
                    src.shape(),
                    model.params.get(id).shape()
                )));
            }
            *model.params.get_mut(id) = src.clone();
        }
        Ok(model)
    }
}
