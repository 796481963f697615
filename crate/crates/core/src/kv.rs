//! Flat `key = value` documents used for manifests and run configs.
//!
//! Blank lines and `#` comments are ignored. Keys may carry dotted section
//! prefixes such as `train.alpha`. Later entries override earlier ones.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvDoc {
    origin: PathBuf,
    entries: BTreeMap<String, (String, usize)>,
}

impl KvDoc {
    pub fn parse(text: &str, origin: impl AsRef<Path>) -> Result<Self> {
        let origin = origin.as_ref().to_path_buf();
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: origin,
                    line: i + 1,
                    msg: format!("expected `key = value`, found `{line}`"),
                });
            };
            let key = k.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    path: origin,
                    line: i + 1,
                    msg: format!("bad key `{key}`"),
                });
            }
            entries.insert(key.to_string(), (v.trim().to_string(), i + 1));
        }
        Ok(Self { origin, entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::NotFound(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Applies a `key=value` override as if appended to the document.
    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn bad(&self, key: &str, msg: String) -> Error {
        match self.entries.get(key) {
            Some((_, line)) if *line > 0 => Error::Parse {
                path: self.origin.clone(),
                line: *line,
                msg,
            },
            _ => Error::Config(msg),
        }
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| self.bad(key, format!("{key}: cannot parse `{v}`: {e}"))),
        }
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Comma-separated list; an empty value gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        let Some(v) = self.get(key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| self.bad(key, format!("{key}: cannot parse `{s}`: {e}"))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Errors on any key outside `allowed`, naming the first offender.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        for k in self.entries.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(self.bad(k, format!("unknown key `{k}`")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_sections_and_lists() {
        let d = KvDoc::parse("# run\ntrain.alpha = 0.1\n\nnames = a, b ,c\n", "cfg").unwrap();
        assert_eq!(d.parsed::<f64>("train.alpha").unwrap(), Some(0.1));
        assert_eq!(d.list::<String>("names").unwrap().unwrap(), ["a", "b", "c"]);
        assert_eq!(d.parsed::<f64>("missing").unwrap(), None);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = KvDoc::parse("a = 1\nnonsense\n", "cfg").unwrap_err();
        assert_eq!(e.to_string(), "cfg:2: expected `key = value`, found `nonsense`");
        let d = KvDoc::parse("a = 1\nb = x\n", "cfg").unwrap();
        assert!(d.parsed::<f64>("b").unwrap_err().to_string().starts_with("cfg:2:"));
        assert!(d.reject_unknown(&["a"]).is_err());
    }

    #[test]
    fn overrides_replace_values() {
        let mut d = KvDoc::parse("a = 1\n", "cfg").unwrap();
        d.set_override("a=2").unwrap();
        assert_eq!(d.parsed::<u32>("a").unwrap(), Some(2));
        assert!(d.set_override("junk").is_err());
    }
}
