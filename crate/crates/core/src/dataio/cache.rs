//! Binary saliency cache.
//!
//! Layout, all integers little-endian:
//! `b"OSRSAL"`, `u16` version, `u64` entry count, then per entry
//! `u32` id length, id bytes, `u32` point count, `u32` checksum length,
//! checksum bytes, and the raw scores as `f64` values.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"OSRSAL";
const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    checksum: String,
    scores: Vec<f64>,
}

/// Per-object saliency scores tagged with the checksum of the model that
/// produced them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SaliencyCache {
    entries: BTreeMap<String, Entry>,
}

impl SaliencyCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn put(&mut self, object_id: &str, scores: Vec<f64>, model_checksum: &str) -> Result<()> {
        if scores.is_empty() {
            return Err(Error::Empty("saliency cache entry"));
        }
        self.entries.insert(
            object_id.to_string(),
            Entry { checksum: model_checksum.to_string(), scores },
        );
        Ok(())
    }

    /// Scores for `object_id`, refusing entries written under another model.
    pub fn get(&self, object_id: &str, model_checksum: &str) -> Result<&[f64]> {
        let e = self
            .entries
            .get(object_id)
            .ok_or_else(|| Error::NotFound(format!("saliency for {object_id}")))?;
        if e.checksum != model_checksum {
            return Err(Error::ChecksumMismatch {
                object_id: object_id.to_string(),
                cached: e.checksum.clone(),
                expected: model_checksum.to_string(),
            });
        }
        Ok(&e.scores)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (id, e) in &self.entries {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            out.extend_from_slice(&(e.scores.len() as u32).to_le_bytes());
            out.extend_from_slice(&(e.checksum.len() as u32).to_le_bytes());
            out.extend_from_slice(e.checksum.as_bytes());
            for s in &e.scores {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::InvalidArgument("not a saliency cache".into()));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(Error::InvalidArgument(format!("unsupported saliency cache version {version}")));
        }
        let count = u64::from_le_bytes(r.array()?);
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let id = r.string()?;
            let n = u32::from_le_bytes(r.array()?) as usize;
            let checksum = r.string()?;
            let scores = (0..n).map(|_| r.array().map(f64::from_le_bytes)).collect::<Result<_>>()?;
            entries.insert(id, Entry { checksum, scores });
        }
        if r.pos != bytes.len() {
            return Err(Error::InvalidArgument("trailing bytes after saliency cache".into()));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::NotFound(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::InvalidArgument("truncated saliency cache".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn string(&mut self) -> Result<String> {
        let n = u32::from_le_bytes(self.array()?) as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::InvalidArgument("saliency cache holds a non-UTF-8 string".into()))
    }
}
