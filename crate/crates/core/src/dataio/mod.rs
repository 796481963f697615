//! Toy benchmark generation, plain-text cloud files and the saliency cache.

mod cache;
mod shapes;

pub use cache::SaliencyCache;
pub use shapes::Shape;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::seeding::{stream_id, stream_rng};

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub known: Vec<Shape>,
    pub unknown: Vec<Shape>,
    pub per_class: usize,
    pub points: usize,
    pub seed: u64,
    /// Coordinate noise std before normalization.
    pub noise: f64,
    /// Train/val/test percentages.
    pub split: [usize; 3],
}

impl Default for DatasetManifest {
    fn default() -> Self {
        use Shape::*;
        Self {
            known: vec![Sphere, Cube, Cylinder, Cone, Torus, Pyramid, Capsule, LBracket],
            unknown: vec![Tube, Ellipsoid, Hemisphere, Wedge],
            per_class: 200,
            points: 256,
            seed: 0,
            noise: 0.01,
            split: [70, 10, 20],
        }
    }
}

const MANIFEST_KEYS: &[&str] = &["known", "unknown", "per_class", "points", "seed", "noise", "split"];

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.known.len() < 2 {
            return Err(Error::Config("need at least 2 known classes".into()));
        }
        if self.unknown.is_empty() {
            return Err(Error::Config("need at least 1 unknown class".into()));
        }
        let mut all: Vec<Shape> = self.known.iter().chain(&self.unknown).copied().collect();
        all.sort();
        if let Some(w) = all.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("shape `{}` listed twice", w[0])));
        }
        if self.per_class == 0 || self.points < 4 {
            return Err(Error::Config("per_class must be positive and points at least 4".into()));
        }
        if self.split.iter().sum::<usize>() != 100 {
            return Err(Error::Config("split percentages must sum to 100".into()));
        }
        let [train, val, _] = self.split_counts();
        if train == 0 || val + train >= self.per_class {
            return Err(Error::Config("every split needs at least one instance per class".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config("noise must be nonnegative".into()));
        }
        Ok(())
    }

    /// Instances per class in each split.
    pub fn split_counts(&self) -> [usize; 3] {
        let train = self.per_class * self.split[0] / 100;
        let val = self.per_class * self.split[1] / 100;
        [train, val, self.per_class - train - val]
    }

    pub fn from_doc(doc: &KvDoc) -> Result<Self> {
        doc.reject_unknown(MANIFEST_KEYS)?;
        let d = Self::default();
        let split = match doc.list::<usize>("split")? {
            None => d.split,
            Some(v) => v
                .try_into()
                .map_err(|_| Error::Config("split needs three percentages".into()))?,
        };
        let m = Self {
            known: doc.list("known")?.unwrap_or(d.known),
            unknown: doc.list("unknown")?.unwrap_or(d.unknown),
            per_class: doc.parsed_or("per_class", d.per_class)?,
            points: doc.parsed_or("points", d.points)?,
            seed: doc.parsed_or("seed", d.seed)?,
            noise: doc.parsed_or("noise", d.noise)?,
            split,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_doc(&KvDoc::load(path)?)
    }

    pub fn to_text(&self) -> String {
        let names = |v: &[Shape]| v.iter().map(|s| s.name()).collect::<Vec<_>>().join(",");
        format!(
            "known = {}\nunknown = {}\nper_class = {}\npoints = {}\nseed = {}\nnoise = {}\nsplit = {},{},{}\n",
            names(&self.known),
            names(&self.unknown),
            self.per_class,
            self.points,
            self.seed,
            self.noise,
            self.split[0],
            self.split[1],
            self.split[2]
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// `<shape>/<index>`, stable across runs.
    pub id: String,
    pub shape: Shape,
    pub split: Split,
    /// Cloud label is the known-class index, or `None` for unknown shapes.
    pub cloud: PointCloud,
}

impl Sample {
    pub fn label(&self) -> Option<usize> {
        self.cloud.label
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.manifest.known.len()
    }

    pub fn known(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split && s.label().is_some())
    }

    pub fn unknown(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split && s.label().is_none())
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Writes `manifest.txt`, `index.csv` and one file per cloud under `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.txt"), self.manifest.to_text())?;
        let mut index = String::from("id,split\n");
        for s in &self.samples {
            let path = dir.join(format!("{}.xyz", s.id));
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            write_cloud(&path, &s.cloud, Some(s.shape.name()))?;
            index.push_str(&format!("{},{}\n", s.id, s.split));
        }
        fs::write(dir.join("index.csv"), index)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = DatasetManifest::load(dir.join("manifest.txt"))?;
        let index_path = dir.join("index.csv");
        let index = fs::read_to_string(&index_path)
            .map_err(|e| Error::NotFound(format!("{}: {e}", index_path.display())))?;
        let mut samples = Vec::new();
        for (i, line) in index.lines().enumerate().skip(1) {
            let bad = |msg: String| Error::Parse { path: index_path.clone(), line: i + 1, msg };
            let (id, split) = line.split_once(',').ok_or_else(|| bad("expected `id,split`".into()))?;
            let split: Split = split.parse().map_err(|e: Error| bad(e.to_string()))?;
            let shape: Shape = id
                .split('/')
                .next()
                .unwrap_or_default()
                .parse()
                .map_err(|e: Error| bad(e.to_string()))?;
            let (mut cloud, _) = read_cloud(dir.join(format!("{id}.xyz")))?;
            cloud.label = manifest.known.iter().position(|k| *k == shape);
            if cloud.label.is_none() && !manifest.unknown.contains(&shape) {
                return Err(bad(format!("shape `{shape}` is not in the manifest")));
            }
            samples.push(Sample { id: id.to_string(), shape, split, cloud });
        }
        Ok(Self { manifest, samples })
    }
}

/// Deterministic toy dataset: each instance draws from its own stream keyed
/// by shape and index, so output does not depend on class order or threads.
pub fn generate_toy(manifest: &DatasetManifest) -> Result<Dataset> {
    manifest.validate()?;
    let [train, val, _] = manifest.split_counts();
    let jobs: Vec<(Shape, Option<usize>, usize)> = manifest
        .known
        .iter()
        .enumerate()
        .map(|(c, s)| (*s, Some(c)))
        .chain(manifest.unknown.iter().map(|s| (*s, None)))
        .flat_map(|(s, label)| (0..manifest.per_class).map(move |i| (s, label, i)))
        .collect();
    let samples = jobs
        .into_par_iter()
        .map(|(shape, label, i)| {
            let mut rng = stream_rng(manifest.seed, stream_id(&[shape as u64, i as u64]));
            let noise = Normal::new(0.0, manifest.noise).map_err(|e| Error::Config(e.to_string()))?;
            let angle: f64 = rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU);
            let (s, c) = angle.sin_cos();
            let points: Vec<Point> = shape
                .sample(manifest.points, &mut rng)
                .into_iter()
                .map(|p| {
                    let q = [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
                    q.map(|v| v + noise.sample(&mut rng))
                })
                .collect();
            let mut cloud = PointCloud::new(points).normalized()?;
            cloud.label = label;
            let split = if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            };
            Ok(Sample { id: format!("{}/{i:04}", shape.name()), shape, split, cloud })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { manifest: manifest.clone(), samples })
}

/// One `x y z` line per point, preceded by `# class <name>` when given.
pub fn write_cloud(path: impl AsRef<Path>, cloud: &PointCloud, class: Option<&str>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    if let Some(name) = class {
        writeln!(out, "# class {name}")?;
    }
    for p in &cloud.points {
        writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a cloud file, returning the class named in its header if any.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<(PointCloud, Option<String>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::NotFound(format!("{}: {e}", path.display())))?;
    let mut class = None;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if i == 0 {
            if let Some(name) = line.strip_prefix("# class ") {
                class = Some(name.trim().to_string());
                continue;
            }
        }
        let bad = |msg: &str| Error::Parse { path: path.to_path_buf(), line: i + 1, msg: msg.into() };
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        let p: Point = coords.try_into().map_err(|_| bad("expected three coordinates"))?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite coordinate"));
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(Error::Parse { path: path.to_path_buf(), line: 1, msg: "no points".into() });
    }
    Ok((PointCloud::new(points), class))
}
