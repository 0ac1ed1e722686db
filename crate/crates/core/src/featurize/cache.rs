//! Embedding cache file.
//!
//! ```text
//! dim=<D> provider=<id>
//! <sha256 hex of UTF-8 text>\t<D space-separated decimal floats>
//! ...
//! ```
//!
//! Records are written sorted by key. Floats use the shortest decimal form
//! that parses back to the same bits, so a write/read cycle is exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{enforce_unit_norm, EmbeddingProvider};
use crate::error::{Result, WiceError};

pub fn text_key(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheLoadReport {
    pub records: usize,
    /// Vectors that were off the unit sphere and got rescaled.
    pub renormalized: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCache {
    dim: usize,
    provider_id: String,
    entries: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingCache {
    pub fn new(dim: usize, provider_id: &str) -> Result<Self> {
        if dim == 0 {
            return Err(WiceError::InvalidDimension { min: 1, got: 0 });
        }
        if provider_id.is_empty() || provider_id.contains(char::is_whitespace) {
            return Err(WiceError::InvalidConfig(format!("bad provider id {provider_id:?}")));
        }
        Ok(EmbeddingCache { dim, provider_id: provider_id.to_string(), entries: BTreeMap::new() })
    }

    /// Embed `texts` with `provider` into a fresh cache.
    pub fn build<P: EmbeddingProvider + ?Sized>(provider: &P, texts: &[String]) -> Result<Self> {
        let mut cache = EmbeddingCache::new(provider.dim(), provider.provider_id())?;
        for t in texts {
            cache.insert_text(t, provider.embed(t)?)?;
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get_text(&self, text: &str) -> Option<&[f64]> {
        self.entries.get(&text_key(text)).map(Vec::as_slice)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.values().map(Vec::as_slice)
    }

    pub fn insert_text(&mut self, text: &str, vector: Vec<f64>) -> Result<bool> {
        self.insert_key(text_key(text), vector)
    }

    /// Insert under a precomputed key, enforcing the unit-norm contract.
    /// Returns whether the vector was rescaled.
    pub fn insert_key(&mut self, key: String, mut vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(WiceError::DimensionMismatch { expected: self.dim, found: vector.len() });
        }
        let rescaled = enforce_unit_norm(&mut vector)?;
        self.entries.insert(key, vector);
        Ok(rescaled)
    }

    /// Restrict to the given texts, failing on the first one not present.
    pub fn subset(&self, texts: &[String]) -> Result<Self> {
        let mut out = EmbeddingCache::new(self.dim, &self.provider_id)?;
        for t in texts {
            let key = text_key(t);
            let v = self.entries.get(&key).ok_or_else(|| WiceError::MissingEmbedding { hash: key.clone() })?;
            out.entries.insert(key, v.clone());
        }
        Ok(out)
    }

    pub fn write(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "dim={} provider={}", self.dim, self.provider_id)?;
        let mut line = String::new();
        for (key, v) in &self.entries {
            line.clear();
            line.push_str(key);
            line.push('\t');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&x.to_string());
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(reader: impl BufRead, origin: &str) -> Result<(Self, CacheLoadReport)> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| WiceError::parse(origin, 1, e.to_string()))?
            .ok_or_else(|| WiceError::parse(origin, 1, "missing header"))?;
        let (dim, provider) = parse_header(&header).ok_or_else(|| {
            WiceError::parse(origin, 1, "header must be `dim=<D> provider=<id>`")
        })?;
        let mut cache = EmbeddingCache::new(dim, &provider)?;
        let mut report = CacheLoadReport::default();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| WiceError::parse(origin, lineno, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (key, values) = line
                .split_once('\t')
                .ok_or_else(|| WiceError::parse(origin, lineno, "expected <hash>\\t<floats>"))?;
            if key.len() != 64 || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(WiceError::parse(origin, lineno, "key is not a sha-256 hex digest"));
            }
            let vector = values
                .split(' ')
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| WiceError::parse(origin, lineno, e.to_string()))?;
            let rescaled = cache
                .insert_key(key.to_ascii_lowercase(), vector)
                .map_err(|e| WiceError::parse(origin, lineno, e.to_string()))?;
            report.records += 1;
            report.renormalized += usize::from(rescaled);
        }
        if report.renormalized > 0 {
            log::warn!("{origin}: renormalized {} of {} vectors", report.renormalized, report.records);
        }
        Ok((cache, report))
    }

    pub fn read(path: &Path) -> Result<(Self, CacheLoadReport)> {
        let file = fs::File::open(path).map_err(|e| WiceError::io(path, e))?;
        Self::read_from(BufReader::new(file), &path.display().to_string())
    }
}

fn parse_header(line: &str) -> Option<(usize, String)> {
    let (dim, provider) = line.trim_end().split_once(' ')?;
    let dim = dim.strip_prefix("dim=")?.parse().ok()?;
    let provider = provider.strip_prefix("provider=")?;
    (!provider.is_empty()).then(|| (dim, provider.to_string()))
}

impl EmbeddingProvider for EmbeddingCache {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let key = text_key(text);
        self.entries.get(&key).cloned().ok_or(WiceError::MissingEmbedding { hash: key })
    }
}
