//! Sentence vectors for text nodes and reference texts, and the per-node
//! feature rows fed to the graph networks.

mod cache;
mod hashed;

use std::collections::BTreeMap;

pub use cache::{text_key, CacheLoadReport, EmbeddingCache};
pub use hashed::{hashed_featurizer, HashedProvider, MIN_HASHED_DIM};

use crate::dom_graph::{DomGraph, TAG_GROUP_COUNT};
use crate::error::{Result, WiceError};
use crate::linalg::{norm, Matrix};

/// Tolerance on the unit-norm contract for stored vectors.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Default corpus embedding width.
pub const DEFAULT_DIM: usize = 512;

/// Source of sentence vectors.
pub trait EmbeddingProvider: Sync {
    fn provider_id(&self) -> &str;
    fn dim(&self) -> usize;
    /// A unit-norm vector of length `dim()`.
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Embed every text; identical strings get identical vectors.
pub fn embed_texts<P: EmbeddingProvider + ?Sized>(texts: &[&str], provider: &P) -> Result<Vec<Vec<f64>>> {
    texts.iter().map(|t| provider.embed(t)).collect()
}

/// Bring a vector onto the unit sphere when it is outside tolerance.
/// Returns whether it had to be rescaled.
pub fn enforce_unit_norm(v: &mut [f64]) -> Result<bool> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(WiceError::NonFiniteVector);
    }
    let n = norm(v);
    if n == 0.0 {
        return Err(WiceError::ZeroVector);
    }
    if (n - 1.0).abs() <= UNIT_NORM_TOL {
        return Ok(false);
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    Ok(true)
}

/// Sentence vectors attached to one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    /// Only text nodes have entries.
    pub node_vectors: BTreeMap<usize, Vec<f64>>,
    /// Absent for unlabeled (inference) pages.
    pub reference_vector: Option<Vec<f64>>,
    pub title_vector: Option<Vec<f64>>,
    pub provider_id: String,
}

impl EmbeddingMatrix {
    /// Text-node vectors as an n × dim matrix with zero rows for other nodes.
    pub fn node_matrix(&self, n_nodes: usize) -> Matrix {
        let mut m = Matrix::zeros(n_nodes, self.dim);
        for (&id, v) in &self.node_vectors {
            m.row_mut(id).copy_from_slice(v);
        }
        m
    }

    pub fn reference(&self) -> Result<&[f64]> {
        self.reference_vector.as_deref().ok_or(WiceError::MissingReference)
    }
}

/// Embed a graph's text nodes, reference and title with one provider.
pub fn embed_graph<P: EmbeddingProvider + ?Sized>(graph: &DomGraph, provider: &P) -> Result<EmbeddingMatrix> {
    let mut node_vectors = BTreeMap::new();
    for node in &graph.nodes {
        if let Some(text) = &node.text {
            node_vectors.insert(node.node_id, provider.embed(text)?);
        }
    }
    let reference_vector = graph.reference_text().map(|t| provider.embed(t)).transpose()?;
    let title_vector = graph.title.as_deref().map(|t| provider.embed(t)).transpose()?;
    Ok(EmbeddingMatrix {
        dim: provider.dim(),
        node_vectors,
        reference_vector,
        title_vector,
        provider_id: provider.provider_id().to_string(),
    })
}

/// Every distinct string a provider must cover for these graphs, sorted.
pub fn unique_texts(graphs: &[DomGraph]) -> Vec<String> {
    let mut set = std::collections::BTreeSet::new();
    for g in graphs {
        for n in &g.nodes {
            if let Some(t) = &n.text {
                set.insert(t.clone());
            }
        }
        if let Some(r) = g.reference_text() {
            set.insert(r.to_string());
        }
        if let Some(t) = &g.title {
            set.insert(t.clone());
        }
    }
    set.into_iter().collect()
}

/// Per-node input rows: one-hot tag group, embedding (zeros for non-text
/// nodes), main-image flag.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub dim: usize,
    pub rows: Matrix,
}

impl FeatureTensor {
    pub fn width_for(dim: usize) -> usize {
        TAG_GROUP_COUNT + dim + 1
    }

    pub fn embedding_slice(&self, node: usize) -> &[f64] {
        &self.rows.row(node)[TAG_GROUP_COUNT..TAG_GROUP_COUNT + self.dim]
    }
}

pub fn assemble_features(graph: &DomGraph, emb: &EmbeddingMatrix, dim: usize) -> Result<FeatureTensor> {
    if emb.dim != dim {
        return Err(WiceError::DimensionMismatch { expected: dim, found: emb.dim });
    }
    let width = FeatureTensor::width_for(dim);
    let mut rows = Matrix::zeros(graph.len(), width);
    for node in &graph.nodes {
        let row = rows.row_mut(node.node_id);
        row[node.tag_group.index()] = 1.0;
        if let Some(v) = emb.node_vectors.get(&node.node_id) {
            if v.len() != dim {
                return Err(WiceError::DimensionMismatch { expected: dim, found: v.len() });
            }
            row[TAG_GROUP_COUNT..TAG_GROUP_COUNT + dim].copy_from_slice(v);
        }
        if node.is_main_image {
            row[width - 1] = 1.0;
        }
    }
    Ok(FeatureTensor { dim, rows })
}
