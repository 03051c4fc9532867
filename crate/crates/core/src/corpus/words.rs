//! Pretrained word vectors in the plain-text layout: one word per line,
//! the token followed by its space-separated components. An optional
//! word2vec-style `count dim` header line is skipped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn new(dim: usize, vectors: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        for (word, v) in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    entity: format!("word vector `{word}`"),
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    entity: format!("word vector `{word}`"),
                });
            }
        }
        Ok(Self { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut vectors = BTreeMap::new();
        let mut dim = None;
        for (lineno, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();
            if lineno == 0
                && rest.len() == 1
                && word.parse::<usize>().is_ok()
                && rest[0].parse::<usize>().is_ok()
            {
                continue;
            }
            let values = rest
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::format(origin, format!("line {}: {e}", lineno + 1)))?;
            if values.is_empty() {
                return Err(Error::format(origin, format!("line {}: no components", lineno + 1)));
            }
            let expected = *dim.get_or_insert(values.len());
            if values.len() != expected {
                return Err(Error::DimensionMismatch {
                    entity: format!("word vector `{word}`"),
                    expected,
                    found: values.len(),
                });
            }
            if vectors.insert(word.to_string(), values).is_some() {
                return Err(Error::DuplicateId {
                    kind: "word",
                    id: word.to_string(),
                });
            }
        }
        Self::new(dim.unwrap_or(0), vectors)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (word, v) in &self.vectors {
            out.push_str(word);
            for x in v {
                // `Display` for f64 prints the shortest round-tripping form.
                write!(out, " {x}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}
