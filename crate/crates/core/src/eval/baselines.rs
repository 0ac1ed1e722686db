use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::dom_graph::DomGraph;
use crate::error::{Result, WiceError};
use crate::gnn::model::{GraphSample, NodeWeights};
use crate::linalg::{dot, norm, NORM_EPS};

/// Text node with the largest weight; ties go to the earliest node.
pub fn extract_context(weights: &NodeWeights) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&w, &m)) in weights.values.iter().zip(&weights.text_mask).enumerate() {
        if m && best.map_or(true, |(_, b)| w > b) {
            best = Some((i, w));
        }
    }
    best.map(|(i, _)| i).ok_or(WiceError::NoTextNodes)
}

/// Which nodes count as context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContextRule {
    /// The single heaviest node.
    Argmax,
    /// The `k` heaviest nodes, heaviest first.
    TopK(usize),
    /// Every node whose weight is at least this value, heaviest first; the
    /// heaviest node is always included.
    MinWeight(f64),
}

pub fn extract_context_nodes(weights: &NodeWeights, rule: ContextRule) -> Result<Vec<usize>> {
    let first = extract_context(weights)?;
    let mut ranked: Vec<usize> = (0..weights.values.len()).filter(|&i| weights.text_mask[i]).collect();
    // Stable sort keeps document order among equal weights.
    ranked.sort_by(|&a, &b| weights.values[b].total_cmp(&weights.values[a]));
    Ok(match rule {
        ContextRule::Argmax => vec![first],
        ContextRule::TopK(k) => ranked.into_iter().take(k.max(1)).collect(),
        ContextRule::MinWeight(t) => {
            let mut out: Vec<usize> = ranked.into_iter().filter(|&i| weights.values[i] >= t).collect();
            if out.is_empty() {
                out.push(first);
            }
            out
        }
    })
}

/// Text node whose embedding is most cosine-similar to `query`; ties go to
/// the earliest node.
pub fn most_similar_text_node(query: &[f64], sample: &GraphSample) -> Result<usize> {
    let qn = norm(query).max(NORM_EPS);
    let mut best: Option<(usize, f64)> = None;
    for i in sample.text_nodes() {
        let z = sample.text_embeddings.row(i);
        let c = dot(query, z) / (qn * norm(z)).max(NORM_EPS);
        if best.map_or(true, |(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i).ok_or(WiceError::NoTextNodes)
}

/// Blind extraction: the text node closest to a regressed embedding.
pub fn baseline_blind(z_hat: &[f64], sample: &GraphSample) -> Result<usize> {
    most_similar_text_node(z_hat, sample)
}

/// The text node closest to the true reference embedding.
pub fn baseline_oracle(sample: &GraphSample) -> Result<usize> {
    let target = sample.target.as_deref().ok_or(WiceError::MissingReference)?;
    most_similar_text_node(target, sample)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionOutput {
    pub z_hat: Vec<f64>,
    pub weights: NodeWeights,
}

/// Inverse-distance weighting: `ẑ = Σ z_i / d_i` over text nodes, with the
/// weights reported normalised to sum to one.
pub fn baseline_distance(graph: &DomGraph, sample: &GraphSample) -> Result<RegressionOutput> {
    if !sample.has_text() {
        return Err(WiceError::NoTextNodes);
    }
    let dist = graph.distances_from(sample.image)?;
    let mut raw = vec![0.0; sample.len()];
    for i in sample.text_nodes() {
        raw[i] = 1.0 / dist[i].max(1) as f64;
    }
    let mut z_hat = vec![0.0; sample.text_embeddings.cols()];
    for i in sample.text_nodes() {
        for (o, z) in z_hat.iter_mut().zip(sample.text_embeddings.row(i)) {
            *o += raw[i] * z;
        }
    }
    let total: f64 = raw.iter().sum();
    let values = raw.iter().map(|w| w / total).collect();
    Ok(RegressionOutput { z_hat, weights: NodeWeights { values, text_mask: sample.text_mask.clone() } })
}

/// Nearest text node to the image in the tree; ties go to the earliest node.
pub fn baseline_text_after_image(graph: &DomGraph, sample: &GraphSample) -> Result<usize> {
    let dist = graph.distances_from(sample.image)?;
    sample.text_nodes().min_by_key(|&i| (dist[i], i)).ok_or(WiceError::NoTextNodes)
}

/// Uniform choice among text nodes, a pure function of `(page_id, seed)`.
pub fn baseline_random(sample: &GraphSample, seed: u64) -> Result<usize> {
    let nodes: Vec<usize> = sample.text_nodes().collect();
    if nodes.is_empty() {
        return Err(WiceError::NoTextNodes);
    }
    let digest = Sha256::digest(sample.page_id.as_bytes());
    let page = u64::from_le_bytes(digest[..8].try_into().expect("digest length"));
    let mut rng = ChaCha8Rng::seed_from_u64(page ^ seed);
    Ok(nodes[rng.gen_range(0..nodes.len())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::adjacency::{normalized_adjacency_from_edges, NeighborLists};
    use crate::linalg::Matrix;

    fn weights(values: &[f64], mask: &[bool]) -> NodeWeights {
        NodeWeights { values: values.to_vec(), text_mask: mask.to_vec() }
    }

    #[test]
    fn argmax_and_ties() {
        let mask = [false, false, false, true, false, true];
        assert_eq!(extract_context(&weights(&[0.0, 0.0, 0.0, 0.7, 0.0, 0.3], &mask)).unwrap(), 3);
        let mask = [false, false, true, false, true];
        assert_eq!(extract_context(&weights(&[0.0, 0.0, 0.5, 0.0, 0.5], &mask)).unwrap(), 2);
        assert_eq!(extract_context(&weights(&[9.0, -4.0], &[false, true])).unwrap(), 1);
        assert!(matches!(extract_context(&weights(&[1.0], &[false])), Err(WiceError::NoTextNodes)));
    }

    #[test]
    fn context_rules() {
        let w = weights(&[0.1, 0.4, 0.0, 0.4, 0.1], &[true, true, false, true, true]);
        assert_eq!(extract_context_nodes(&w, ContextRule::Argmax).unwrap(), vec![1]);
        assert_eq!(extract_context_nodes(&w, ContextRule::TopK(3)).unwrap(), vec![1, 3, 0]);
        assert_eq!(extract_context_nodes(&w, ContextRule::MinWeight(0.3)).unwrap(), vec![1, 3]);
        assert_eq!(extract_context_nodes(&w, ContextRule::MinWeight(0.9)).unwrap(), vec![1]);
    }

    fn path_sample(n: usize, image: usize, text: &[usize]) -> (DomGraph, GraphSample) {
        use crate::dom_graph::{DomNode, NodeKind, TagGroup};
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        let nodes = (0..n)
            .map(|i| DomNode {
                node_id: i,
                raw_tag: if text.contains(&i) { "#text".into() } else { "div".into() },
                tag_group: if text.contains(&i) { TagGroup::TextLeaf } else { TagGroup::Division },
                kind: if i == image {
                    NodeKind::Image
                } else if text.contains(&i) {
                    NodeKind::Text
                } else {
                    NodeKind::Element
                },
                text: text.contains(&i).then(|| format!("t{i}")),
                is_main_image: i == image,
                anchor: None,
            })
            .collect();
        let graph = DomGraph { page_id: "p".into(), site_id: "s".into(), title: None, reference: None, nodes, edges: edges.clone() };
        let mut emb = Matrix::zeros(n, 2);
        for &t in text {
            emb.row_mut(t).copy_from_slice(&[1.0, t as f64]);
        }
        let sample = GraphSample {
            page_id: "p".into(),
            site_id: "s".into(),
            features: Matrix::zeros(n, 1),
            adjacency: normalized_adjacency_from_edges(n, &edges),
            neighbors: NeighborLists::with_self_loops(n, &edges),
            text_mask: (0..n).map(|i| text.contains(&i)).collect(),
            text_embeddings: emb,
            image,
            target: Some(vec![1.0, 0.0]),
        };
        (graph, sample)
    }

    #[test]
    fn inverse_distance_weights() {
        let (g, s) = path_sample(3, 0, &[1, 2]);
        let out = baseline_distance(&g, &s).unwrap();
        assert!((out.weights.values[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((out.weights.values[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(out.z_hat, vec![1.5, 2.0]);
        assert_eq!(extract_context(&out.weights).unwrap(), baseline_text_after_image(&g, &s).unwrap());
    }

    #[test]
    fn equidistant_text_is_uniform() {
        let (g, s) = path_sample(3, 1, &[0, 2]);
        let out = baseline_distance(&g, &s).unwrap();
        assert_eq!(out.weights.values, vec![0.5, 0.0, 0.5]);
        assert_eq!(baseline_text_after_image(&g, &s).unwrap(), 0);
    }

    #[test]
    fn blind_and_oracle() {
        let (_, s) = path_sample(4, 0, &[1, 2, 3]);
        assert_eq!(baseline_blind(s.text_embeddings.row(2), &s).unwrap(), 2);
        assert_eq!(baseline_oracle(&s).unwrap(), 1);
        let mut twin = s.clone();
        twin.text_embeddings.row_mut(3).copy_from_slice(&[1.0, 2.0]);
        assert_eq!(baseline_blind(&[1.0, 2.0], &twin).unwrap(), 2);
    }

    #[test]
    fn random_is_seeded_and_uniform() {
        let (_, s) = path_sample(6, 0, &[1, 2, 3, 4, 5]);
        assert_eq!(baseline_random(&s, 3).unwrap(), baseline_random(&s, 3).unwrap());
        let (_, single) = path_sample(2, 0, &[1]);
        assert_eq!(baseline_random(&single, 9).unwrap(), 1);
        let mut counts = [0usize; 6];
        for p in 0..10_000 {
            let mut page = s.clone();
            page.page_id = format!("page-{p}");
            counts[baseline_random(&page, 0).unwrap()] += 1;
        }
        for c in &counts[1..] {
            let f = *c as f64 / 10_000.0;
            assert!((f - 0.2).abs() < 0.02, "{counts:?}");
        }
    }
}
