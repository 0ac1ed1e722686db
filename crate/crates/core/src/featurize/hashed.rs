//! Deterministic stand-in sentence encoder: character 3 to 5-grams of each
//! word are hashed into signed buckets (a sparse random projection of the
//! n-gram count vector), then L2-normalised.

use super::EmbeddingProvider;
use crate::error::{Result, WiceError};
use crate::linalg::norm;

pub const MIN_HASHED_DIM: usize = 16;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_gram(gram: &[char], seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ mix64(seed);
    let mut buf = [0u8; 4];
    for c in gram {
        for b in c.encode_utf8(&mut buf).bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    mix64(h)
}

fn tokens(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let words: Vec<String> =
        lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_string).collect();
    if words.is_empty() {
        // Punctuation-only text still gets a vector.
        vec![lower.trim().to_string()]
    } else {
        words
    }
}

/// Hashed character n-gram embedding of `text`; a pure function of
/// `(text, dim, seed)`.
pub fn hashed_featurizer(text: &str, dim: usize, seed: u64) -> Result<Vec<f64>> {
    if dim < MIN_HASHED_DIM {
        return Err(WiceError::InvalidDimension { min: MIN_HASHED_DIM, got: dim });
    }
    if text.trim().is_empty() {
        return Err(WiceError::EmptyText);
    }
    let mut v = vec![0.0; dim];
    for word in tokens(text) {
        let chars: Vec<char> = std::iter::once('<').chain(word.chars()).chain(std::iter::once('>')).collect();
        for n in 3..=5 {
            for gram in chars.windows(n) {
                let h = hash_gram(gram, seed);
                let bucket = (h % dim as u64) as usize;
                v[bucket] += if h >> 63 == 1 { -1.0 } else { 1.0 };
            }
        }
    }
    let n = norm(&v);
    if n == 0.0 {
        // Every n-gram cancelled out; use the first bucket touched.
        let chars: Vec<char> = format!("<{}>", text.trim()).chars().collect();
        let h = hash_gram(&chars[..3.min(chars.len())], seed);
        v[(h % dim as u64) as usize] = 1.0;
        return Ok(v);
    }
    for x in &mut v {
        *x /= n;
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedProvider {
    dim: usize,
    seed: u64,
    id: String,
}

impl HashedProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < MIN_HASHED_DIM {
            return Err(WiceError::InvalidDimension { min: MIN_HASHED_DIM, got: dim });
        }
        Ok(HashedProvider { dim, seed, id: format!("hashed-d{dim}-s{seed}") })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Inverse of the provider id format `hashed-d<dim>-s<seed>`.
    pub fn from_id(id: &str) -> Option<Self> {
        let rest = id.strip_prefix("hashed-d")?;
        let (dim, seed) = rest.split_once("-s")?;
        HashedProvider::new(dim.parse().ok()?, seed.parse().ok()?).ok()
    }
}

impl EmbeddingProvider for HashedProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        hashed_featurizer(text, self.dim, self.seed)
    }
}
