use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use osr3d_core::dataio::{generate_toy, write_cloud, Dataset, DatasetManifest, SaliencyCache, Split};
use osr3d_core::diffcore::Checkpoint;
use osr3d_core::encoder::Model;
use osr3d_core::evalkit::{evaluate, write_metrics_csv, MetricsRow, ScoredSample, Scorer};
use osr3d_core::gss::{mix, LowPart, MixConfig};
use osr3d_core::kv::KvDoc;
use osr3d_core::seeding::{stream_id, stream_rng};
use osr3d_core::trainer::{
    cache_saliency, score_split, EpochRow, LossWeights, TrainConfig, Trainer, TRAIN_KEYS,
};
use osr3d_core::tsd::{tunable_decompose, SaliencyMap};
use osr3d_core::Error;
use rand::seq::index;

use crate::Common;

const PATH_SALIENCY: &str = "paths.saliency";

fn load_doc(common: &Common) -> Result<KvDoc> {
    let mut doc = match &common.config {
        Some(p) => KvDoc::load(p)?,
        None => KvDoc::default(),
    };
    for o in &common.overrides {
        doc.set_override(o)?;
    }
    Ok(doc)
}

fn run_config(common: &Common, epochs_key: &str, epochs: Option<usize>) -> Result<(TrainConfig, KvDoc)> {
    let mut doc = load_doc(common)?;
    let mut allowed = TRAIN_KEYS.to_vec();
    allowed.push(PATH_SALIENCY);
    doc.reject_unknown(&allowed)?;
    if let Some(s) = common.seed {
        doc.set("train.seed", s);
    }
    if let Some(e) = epochs {
        doc.set(epochs_key, e);
    }
    Ok((TrainConfig::from_doc(&doc)?, doc))
}

fn out_dir(common: &Common) -> Result<&Path> {
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(&common.out)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn load_model(path: &Path, dataset: &Dataset) -> Result<Model> {
    let model = Model::from_checkpoint(&Checkpoint::load(path)?)
        .with_context(|| format!("reading checkpoint {}", path.display()))?;
    if model.num_classes() != dataset.num_classes() {
        return Err(Error::Config(format!(
            "checkpoint has {} known classes but the dataset has {}",
            model.num_classes(),
            dataset.num_classes()
        ))
        .into());
    }
    Ok(model)
}

fn progress(phase: &'static str, r: &EpochRow) {
    println!(
        "{phase} epoch={} l_cls={:.6} l_h={:.6} l_s={:.6} l_m={:.6} total={:.6} val_acc={:.4}",
        r.epoch, r.terms.cls, r.terms.high, r.terms.synth, r.terms.margin, r.total, r.val_acc
    );
}

pub fn gen(common: &Common) -> Result<()> {
    let mut doc = load_doc(common)?;
    if let Some(s) = common.seed {
        doc.set("seed", s);
    }
    let manifest = DatasetManifest::from_doc(&doc)?;
    let dataset = generate_toy(&manifest)?;
    dataset.save(out_dir(common)?)?;
    println!("wrote {} clouds to {}", dataset.samples.len(), common.out.display());
    Ok(())
}

pub fn pretrain(common: &Common, dataset: &Path, epochs: Option<usize>) -> Result<()> {
    let (config, doc) = run_config(common, "train.pretrain_epochs", epochs)?;
    let data = load_dataset(dataset)?;
    let out = out_dir(common)?;
    let mut model = Model::new(config.encoder(data.num_classes()), config.seed)?;
    let report = Trainer::new(&data, config.clone())?
        .with_progress(progress)
        .run(&mut model, config.pretrain_epochs, LossWeights::CLOSED_SET, "pretrain")?;
    model.to_checkpoint().save(&out.join("pretrain.ckpt"))?;
    fs::write(out.join("pretrain_report.csv"), report.to_csv())?;
    fs::write(out.join("config.txt"), config_record(&config, &doc))?;
    Ok(())
}

fn config_record(config: &TrainConfig, doc: &KvDoc) -> String {
    let mut text = String::new();
    let resolved = config.to_doc();
    for k in resolved.keys() {
        let _ = writeln!(text, "{k} = {}", resolved.get(k).unwrap_or_default());
    }
    if let Some(p) = doc.get(PATH_SALIENCY) {
        let _ = writeln!(text, "{PATH_SALIENCY} = {p}");
    }
    text
}

pub fn saliency(common: &Common, dataset: &Path, checkpoint: &Path) -> Result<()> {
    run_config(common, "train.epochs", None)?;
    let data = load_dataset(dataset)?;
    let model = load_model(checkpoint, &data)?;
    let cache = cache_saliency(&model, &data)?;
    let path = out_dir(common)?.join("saliency.bin");
    cache.save(&path)?;
    println!("wrote {} saliency maps to {}", cache.len(), path.display());
    Ok(())
}

fn saliency_path(doc: &KvDoc, checkpoint: &Path) -> PathBuf {
    match doc.get(PATH_SALIENCY) {
        Some(p) => PathBuf::from(p),
        None => checkpoint.parent().unwrap_or(Path::new(".")).join("saliency.bin"),
    }
}

pub fn train(common: &Common, dataset: &Path, checkpoint: &Path, epochs: Option<usize>) -> Result<()> {
    let (config, doc) = run_config(common, "train.epochs", epochs)?;
    let data = load_dataset(dataset)?;
    let mut model = load_model(checkpoint, &data)?;
    let closed = config.alpha == 0.0 && config.beta == 0.0 && config.gamma == 0.0;
    let needs_cache = config.tsd && !config.refresh_saliency && !closed;
    let cache = if needs_cache {
        let path = saliency_path(&doc, checkpoint);
        if !path.exists() {
            anyhow::bail!("missing saliency cache {}; run `osr3d saliency` first", path.display());
        }
        Some(SaliencyCache::load(&path)?)
    } else {
        None
    };
    let out = out_dir(common)?;
    let weights = LossWeights { alpha: config.alpha, beta: config.beta, gamma: config.gamma };
    let mut trainer = Trainer::new(&data, config.clone())?.with_progress(progress);
    match &cache {
        Some(c) => trainer.attach_saliency(c, &model.to_checkpoint().checksum())?,
        None if config.refresh_saliency && weights != LossWeights::CLOSED_SET => trainer.refresh_saliency(&model)?,
        None => {}
    }
    let report = trainer.run(&mut model, config.epochs, weights, "train")?;
    model.to_checkpoint().save(&out.join("model.ckpt"))?;
    fs::write(out.join("train_report.csv"), report.to_csv())?;
    fs::write(out.join("config.txt"), config_record(&config, &doc))?;
    Ok(())
}

pub fn eval(common: &Common, dataset: &Path, checkpoint: &Path, scorer: &str) -> Result<()> {
    let scorers: Vec<Scorer> = match scorer {
        "all" => vec![Scorer::Mls, Scorer::Msp],
        s => vec![s.parse()?],
    };
    let data = load_dataset(dataset)?;
    let model = load_model(checkpoint, &data)?;
    let out = out_dir(common)?;
    let mut rows = Vec::new();
    let mut dump = String::from("method,split,id,known,true_class,predicted_class,confidence\n");
    for &s in &scorers {
        for split in [Split::Val, Split::Test] {
            let scored = score_split(&model, &data, split, s)?;
            if scored.iter().all(|(_, x)| x.is_known) || scored.iter().all(|(_, x)| !x.is_known) {
                continue;
            }
            for (id, x) in &scored {
                let truth = x.true_class.map(|c| c.to_string()).unwrap_or_default();
                let _ = writeln!(dump, "{s},{split},{id},{},{truth},{},{}", x.is_known, x.predicted_class, x.confidence);
            }
            let samples: Vec<ScoredSample> = scored.into_iter().map(|(_, x)| x).collect();
            rows.push(MetricsRow { method: s.to_string(), split: split.to_string(), metrics: evaluate(&samples)? });
        }
    }
    let mut csv = Vec::new();
    write_metrics_csv(&mut csv, &rows)?;
    fs::write(out.join("metrics.csv"), &csv)?;
    fs::write(out.join("scores.csv"), dump)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

fn join<T: ToString>(v: impl IntoIterator<Item = T>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn synth_demo(common: &Common, dataset: &Path, checkpoint: &Path, count: usize) -> Result<()> {
    let (config, doc) = run_config(common, "train.epochs", None)?;
    let data = load_dataset(dataset)?;
    let model = load_model(checkpoint, &data)?;
    let path = saliency_path(&doc, checkpoint);
    if !path.exists() {
        anyhow::bail!("missing saliency cache {}; run `osr3d saliency` first", path.display());
    }
    let cache = SaliencyCache::load(&path)?;
    let checksum = model.to_checkpoint().checksum();
    let train: Vec<usize> = (0..data.samples.len())
        .filter(|&i| data.samples[i].split == Split::Train && data.samples[i].label().is_some())
        .collect();
    if train.len() < config.mix_count {
        return Err(Error::InvalidArgument(format!("need {} training objects to mix", config.mix_count)).into());
    }
    let mix_cfg = MixConfig {
        num_classes: data.num_classes(),
        smoothing: config.smoothing.clone(),
        transforms: config.transforms.clone(),
    };
    let out = out_dir(common)?;
    for k in 0..count {
        let mut rng = stream_rng(config.seed, stream_id(&[7, k as u64]));
        let chosen: Vec<usize> = index::sample(&mut rng, train.len(), config.mix_count).iter().map(|j| train[j]).collect();
        let mut parts = Vec::new();
        let mut lows = Vec::new();
        for &i in &chosen {
            let s = &data.samples[i];
            let sal = SaliencyMap::from_raw(cache.get(&s.id, &checksum)?.to_vec());
            let split = tunable_decompose(&sal, config.mix_count, config.thresholds, &[], &mut rng)?;
            parts.push(LowPart { object_id: i, class: s.label().expect("known"), cloud: split.low_cloud(&s.cloud) });
            lows.push(split.low);
        }
        let synth = mix(&parts, data.samples[chosen[0]].cloud.len(), &mix_cfg, &mut rng)?;
        let stem = format!("synth_{k:03}");
        write_cloud(out.join(format!("{stem}.xyz")), &synth.cloud, Some("unknown"))?;

        let mut meta = String::new();
        let classes = synth.source_classes.iter().map(|(c, n)| format!("{}:{n}", data.manifest.known[*c]));
        let _ = writeln!(meta, "classes = {}", join(classes));
        let _ = writeln!(meta, "soft_label = {}", join(synth.soft_label.probs()));
        let _ = writeln!(meta, "parts = {}", synth.parts.len());
        for (j, p) in synth.parts.iter().enumerate() {
            let _ = writeln!(meta, "part.{j}.object = {}", data.samples[p.object_id].id);
            let _ = writeln!(meta, "part.{j}.low = {}", join(&lows[j]));
            let _ = writeln!(meta, "part.{j}.scale = {}", p.transform.scale);
            let _ = writeln!(meta, "part.{j}.angle = {}", p.transform.angle);
            let _ = writeln!(meta, "part.{j}.offset = {}", join(p.transform.offset));
        }
        let _ = writeln!(meta, "center = {}", join(synth.center));
        let _ = writeln!(meta, "scale = {}", synth.scale);
        let _ = writeln!(meta, "origin = {}", join(synth.origin.iter().map(|(p, i)| format!("{p}:{i}"))));
        fs::write(out.join(format!("{stem}.meta")), meta)?;
    }
    println!("wrote {count} synthetic samples to {}", out.display());
    Ok(())
}
