//! Plain-text parameter checkpoints.
//!
//! ```text
//! osr3d-checkpoint 1
//! meta <key> <value>
//! param <name> <rank> <dim>...
//! <value> <value> ...
//! end
//! ```
//!
//! `meta` lines come first and carry model hyperparameters. Each `param`
//! header is followed by exactly one line with its values in row-major
//! order, written in shortest round-trip exponent notation so a reload is
//! bit-exact. Names and meta keys must not contain whitespace.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::diffcore::array::Array;
use crate::diffcore::params::ParamStore;
use crate::error::{Error, Result};

const MAGIC: &str = "osr3d-checkpoint 1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, value) in self.params.iter() {
            let _ = write!(out, "param {name} {}", value.shape().len());
            for d in value.shape() {
                let _ = write!(out, " {d}");
            }
            out.push('\n');
            let mut first = true;
            for v in value.data() {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v:e}");
            }
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(err(1, format!("expected header `{MAGIC}`"))),
        }
        let mut meta = Vec::new();
        let mut params = ParamStore::new();
        loop {
            let Some((no, line)) = lines.next() else {
                return Err(err(0, "missing `end` marker".into()));
            };
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("end") => break,
                Some("meta") => {
                    let key = parts.next().ok_or_else(|| err(no, "meta without key".into()))?;
                    let value = parts.collect::<Vec<_>>().join(" ");
                    meta.push((key.to_string(), value));
                }
                Some("param") => {
                    let name = parts.next().ok_or_else(|| err(no, "param without name".into()))?;
                    let nums: Vec<usize> = parts
                        .map(|p| p.parse().map_err(|_| err(no, format!("bad dimension `{p}`"))))
                        .collect::<Result<_>>()?;
                    let (&rank, dims) = nums.split_first().ok_or_else(|| err(no, "param without rank".into()))?;
                    if dims.len() != rank {
                        return Err(err(no, format!("rank {rank} but {} dimensions", dims.len())));
                    }
                    let (vno, vline) = lines.next().ok_or_else(|| err(no, "missing values line".into()))?;
                    let data: Vec<f64> = vline
                        .split_whitespace()
                        .map(|p| p.parse().map_err(|_| err(vno, format!("bad value `{p}`"))))
                        .collect::<Result<_>>()?;
                    let array = Array::new(dims.to_vec(), data).map_err(|e| err(vno, e.to_string()))?;
                    params.add(name, array);
                }
                Some(other) => return Err(err(no, format!("unexpected record `{other}`"))),
                None => return Err(err(no, "blank line".into())),
            }
        }
        Ok(Self { meta, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in proptest::collection::vec(-1e6f64..1e6, 1..40), tiny in -1e-300f64..1e-300) {
            let mut params = ParamStore::new();
            let n = values.len();
            params.add("layer.weight", Array::matrix(1, n, values).unwrap());
            params.add("layer.bias", Array::vector(vec![tiny, 0.1, -0.0]));
            let ck = Checkpoint { meta: vec![("widths".into(), "3,8".into())], params };
            let back = Checkpoint::parse(&ck.to_text(), Path::new("mem")).unwrap();
            for ((_, a), (_, b)) in ck.params.iter().zip(back.params.iter()) {
                let bits_a: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
                let bits_b: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(bits_a, bits_b);
            }
            prop_assert_eq!(back.meta_value("widths"), Some("3,8"));
        }
    }

    #[test]
    fn rejects_truncated_file() {
        let text = "osr3d-checkpoint 1\nparam w 1 2\n1e0\nend\n";
        let e = Checkpoint::parse(text, Path::new("x.ckpt")).unwrap_err();
        assert!(e.to_string().contains("x.ckpt:3"), "{e}");
        assert!(Checkpoint::parse("osr3d-checkpoint 1\n", Path::new("x")).is_err());
    }
}
