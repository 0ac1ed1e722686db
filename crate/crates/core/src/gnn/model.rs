//! The four graph models and their parameter sets.
//!
//! * `wgcn`: GCN stack ending in one scalar per node; a softmax over text
//!   nodes gives the node weights and the prediction is the weighted
//!   average of text embeddings.
//! * `gcn`, `gat`, `dgcn`: node representations read out at the image node
//!   (or averaged) and projected to the embedding width.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adjacency::{normalized_adjacency, NeighborLists, SparseMatrix};
use super::layers::{dgcn_on_tape, gat_on_tape, gcn_on_tape, Activation, DgcnBlockVars, GatHeadVars, HeadCombine};
use super::tape::{Tape, Var};
use crate::dom_graph::DomGraph;
use crate::error::{Result, WiceError};
use crate::featurize::{assemble_features, EmbeddingMatrix, FeatureTensor};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Wgcn,
    Gcn,
    Gat,
    Dgcn,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [Architecture::Wgcn, Architecture::Gcn, Architecture::Gat, Architecture::Dgcn];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Wgcn => "wgcn",
            Architecture::Gcn => "gcn",
            Architecture::Gat => "gat",
            Architecture::Dgcn => "dgcn",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = WiceError;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| WiceError::InvalidConfig(format!("unknown architecture {s:?}")))
    }
}

/// How wGCN turns its per-node scalars into weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Softmax over text nodes.
    Softmax,
    /// Raw scalars on text nodes, zero elsewhere.
    Raw,
}

/// Graph-level readout of the plain models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    ImageNode,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// Sentence embedding width.
    pub embed_dim: usize,
    /// wgcn/gcn: hidden widths. gat: per-head width of each attention layer.
    pub hidden: Vec<usize>,
    pub heads: usize,
    pub depth: usize,
    pub width: usize,
    pub weight_mode: WeightMode,
    pub readout: Readout,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(architecture: Architecture, embed_dim: usize, seed: u64) -> Self {
        let hidden = match architecture {
            Architecture::Wgcn | Architecture::Gcn => vec![256, 64],
            Architecture::Gat => vec![32, 64],
            Architecture::Dgcn => vec![],
        };
        ModelConfig {
            architecture,
            embed_dim,
            hidden,
            heads: 4,
            depth: 8,
            width: 64,
            weight_mode: WeightMode::Softmax,
            readout: Readout::ImageNode,
            seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        FeatureTensor::width_for(self.embed_dim)
    }

    /// Widths of successive representations, input first.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        match self.architecture {
            Architecture::Wgcn => {
                dims.extend(&self.hidden);
                dims.push(1);
            }
            Architecture::Gcn => {
                dims.extend(&self.hidden);
                dims.push(self.embed_dim);
            }
            Architecture::Gat => {
                let last = self.hidden.len().saturating_sub(1);
                for (i, w) in self.hidden.iter().enumerate() {
                    dims.push(if i < last { w * self.heads } else { *w });
                }
                dims.push(self.embed_dim);
            }
            Architecture::Dgcn => {
                dims.extend(std::iter::repeat(self.width).take(self.depth + 1));
                dims.push(self.embed_dim);
            }
        }
        dims
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(WiceError::InvalidConfig(m.to_string()));
        if self.embed_dim == 0 {
            return bad("embedding width must be positive");
        }
        match self.architecture {
            Architecture::Wgcn | Architecture::Gcn | Architecture::Gat if self.hidden.is_empty() => {
                bad("at least one hidden layer is required")
            }
            Architecture::Gat if self.heads == 0 => bad("attention needs at least one head"),
            Architecture::Dgcn if self.width == 0 => bad("residual width must be positive"),
            _ if self.hidden.contains(&0) => bad("hidden widths must be positive"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub value: Matrix,
}

/// All learnable parameters of one model, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tensors: Vec<NamedTensor>,
}

struct Init {
    rng: ChaCha8Rng,
    tensors: Vec<NamedTensor>,
}

impl Init {
    fn glorot(&mut self, name: String, rows: usize, cols: usize) {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| self.rng.gen_range(-limit..limit)).collect();
        self.tensors.push(NamedTensor { name, value: Matrix::from_vec(rows, cols, data) });
    }

    fn fill(&mut self, name: String, cols: usize, value: f64) {
        self.tensors.push(NamedTensor { name, value: Matrix::filled(1, cols, value) });
    }
}

impl ModelParams {
    /// Seeded Glorot-uniform weights, zero biases, unit layer-norm gains.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut init = Init { rng: ChaCha8Rng::seed_from_u64(config.seed), tensors: Vec::new() };
        let dims = config.layer_dims();
        match config.architecture {
            Architecture::Wgcn | Architecture::Gcn => {
                let layers = if config.architecture == Architecture::Wgcn { dims.len() - 1 } else { dims.len() - 2 };
                for l in 0..layers {
                    init.glorot(format!("gcn.{l}.weight"), dims[l], dims[l + 1]);
                    init.fill(format!("gcn.{l}.bias"), dims[l + 1], 0.0);
                }
            }
            Architecture::Gat => {
                let mut input = dims[0];
                let last = config.hidden.len() - 1;
                for (l, &w) in config.hidden.iter().enumerate() {
                    for k in 0..config.heads {
                        init.glorot(format!("gat.{l}.head{k}.weight"), input, w);
                        init.glorot(format!("gat.{l}.head{k}.att_src"), w, 1);
                        init.glorot(format!("gat.{l}.head{k}.att_dst"), w, 1);
                    }
                    let out = if l < last { w * config.heads } else { w };
                    init.fill(format!("gat.{l}.bias"), out, 0.0);
                    input = out;
                }
            }
            Architecture::Dgcn => {
                let w = config.width;
                init.glorot("dgcn.input.weight".into(), dims[0], w);
                init.fill("dgcn.input.bias".into(), w, 0.0);
                for l in 0..config.depth {
                    init.fill(format!("dgcn.{l}.norm_gain"), w, 1.0);
                    init.fill(format!("dgcn.{l}.norm_shift"), w, 0.0);
                    init.glorot(format!("dgcn.{l}.weight"), w, w);
                    init.fill(format!("dgcn.{l}.bias"), w, 0.0);
                }
                init.fill("dgcn.out.norm_gain".into(), w, 1.0);
                init.fill("dgcn.out.norm_shift".into(), w, 0.0);
            }
        }
        if config.architecture != Architecture::Wgcn {
            let from = dims[dims.len() - 2];
            init.glorot("proj.weight".into(), from, config.embed_dim);
            init.fill("proj.bias".into(), config.embed_dim, 0.0);
        }
        Ok(ModelParams { config, tensors: init.tensors })
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.tensors.iter().find(|t| t.name == name).map(|t| &t.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.tensors.iter_mut().find(|t| t.name == name).map(|t| &mut t.value)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.value.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.is_finite())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.value.as_slice().iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length");
        let mut offset = 0;
        for t in &mut self.tensors {
            let n = t.value.len();
            t.value.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }

    pub fn zeros_like(&self) -> Vec<Matrix> {
        self.tensors.iter().map(|t| Matrix::zeros(t.value.rows(), t.value.cols())).collect()
    }
}

/// Precomputed per-page model inputs.
#[derive(Debug, Clone)]
pub struct GraphSample {
    pub page_id: String,
    pub site_id: String,
    pub features: Matrix,
    pub adjacency: SparseMatrix,
    pub neighbors: NeighborLists,
    pub text_mask: Vec<bool>,
    /// n × dim, zero rows for non-text nodes.
    pub text_embeddings: Matrix,
    pub image: usize,
    pub target: Option<Vec<f64>>,
}

impl GraphSample {
    pub fn new(graph: &DomGraph, emb: &EmbeddingMatrix, dim: usize) -> Result<Self> {
        let features = assemble_features(graph, emb, dim)?.rows;
        let image = graph
            .image_node()
            .ok_or_else(|| WiceError::InvalidConfig(format!("graph {} has no main image", graph.page_id)))?;
        Ok(GraphSample {
            page_id: graph.page_id.clone(),
            site_id: graph.site_id.clone(),
            features,
            adjacency: normalized_adjacency(graph),
            neighbors: NeighborLists::with_self_loops(graph.len(), &graph.edges),
            text_mask: graph.text_mask(),
            text_embeddings: emb.node_matrix(graph.len()),
            image,
            target: emb.reference_vector.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.text_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text_mask.is_empty()
    }

    pub fn has_text(&self) -> bool {
        self.text_mask.iter().any(|m| *m)
    }

    pub fn text_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.text_mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i)
    }
}

/// Weights over all nodes with the text mask they were computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeWeights {
    pub values: Vec<f64>,
    pub text_mask: Vec<bool>,
}

impl NodeWeights {
    pub fn text_sum(&self) -> f64 {
        self.values.iter().zip(&self.text_mask).filter(|(_, m)| **m).map(|(v, _)| v).sum()
    }
}

/// Output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub z_hat: Vec<f64>,
    /// wgcn node weights.
    pub weights: Option<NodeWeights>,
    /// gat: last-layer attention of the image node over all nodes, averaged over heads.
    pub attention: Option<Vec<f64>>,
    /// Cosine loss against the reference, when the page has one. A zero
    /// prediction scores 1 through the ε guard.
    pub loss: Option<f64>,
}

struct Built {
    z_hat: Var,
    weights: Option<Var>,
    last_attention: Vec<Var>,
    loss: Option<Var>,
}

fn build<'g>(params: &ModelParams, sample: &'g GraphSample, tape: &mut Tape<'g>, want_grads: bool) -> Result<(Built, Vec<Var>)> {
    let config = &params.config;
    if sample.features.cols() != config.input_dim() {
        return Err(WiceError::DimensionMismatch { expected: config.input_dim(), found: sample.features.cols() });
    }
    if !sample.has_text() {
        return Err(WiceError::NoTextNodes);
    }
    let vars: Vec<Var> = params
        .tensors
        .iter()
        .map(|t| if want_grads { tape.param(t.value.clone()) } else { tape.constant(t.value.clone()) })
        .collect();
    let p = |name: &str| vars[params.index_of(name).unwrap_or_else(|| panic!("missing parameter {name}"))];
    let x = tape.constant(sample.features.clone());
    let adj = &sample.adjacency;
    let mut last_attention = Vec::new();

    let (z_hat, weights) = match config.architecture {
        Architecture::Wgcn => {
            let layers = config.hidden.len() + 1;
            let mut h = x;
            for l in 0..layers {
                let act = if l + 1 < layers { Activation::Relu } else { Activation::Identity };
                h = gcn_on_tape(tape, adj, h, p(&format!("gcn.{l}.weight")), p(&format!("gcn.{l}.bias")), act);
            }
            let w = match config.weight_mode {
                WeightMode::Softmax => tape.masked_softmax(&sample.text_mask, h),
                WeightMode::Raw => tape.mask_rows(&sample.text_mask, h),
            };
            let z = tape.constant(sample.text_embeddings.clone());
            (tape.weighted_sum(w, z), Some(w))
        }
        Architecture::Gcn => {
            let mut h = x;
            for l in 0..config.hidden.len() {
                h = gcn_on_tape(tape, adj, h, p(&format!("gcn.{l}.weight")), p(&format!("gcn.{l}.bias")), Activation::Relu);
            }
            (project(tape, sample, config.readout, h, p("proj.weight"), p("proj.bias")), None)
        }
        Architecture::Gat => {
            let mut h = x;
            let last = config.hidden.len() - 1;
            for l in 0..config.hidden.len() {
                let heads: Vec<GatHeadVars> = (0..config.heads)
                    .map(|k| GatHeadVars {
                        w: p(&format!("gat.{l}.head{k}.weight")),
                        a_src: p(&format!("gat.{l}.head{k}.att_src")),
                        a_dst: p(&format!("gat.{l}.head{k}.att_dst")),
                    })
                    .collect();
                let (combine, act) =
                    if l < last { (HeadCombine::Concat, Activation::Elu) } else { (HeadCombine::Mean, Activation::Identity) };
                let (out, att) =
                    gat_on_tape(tape, &sample.neighbors, h, &heads, p(&format!("gat.{l}.bias")), combine, act);
                h = out;
                last_attention = att;
            }
            (project(tape, sample, config.readout, h, p("proj.weight"), p("proj.bias")), None)
        }
        Architecture::Dgcn => {
            let mut h = gcn_on_tape(tape, adj, x, p("dgcn.input.weight"), p("dgcn.input.bias"), Activation::Identity);
            for l in 0..config.depth {
                let block = DgcnBlockVars {
                    gamma: p(&format!("dgcn.{l}.norm_gain")),
                    beta: p(&format!("dgcn.{l}.norm_shift")),
                    w: p(&format!("dgcn.{l}.weight")),
                    b: p(&format!("dgcn.{l}.bias")),
                };
                h = dgcn_on_tape(tape, adj, h, block);
            }
            let normed = tape.layer_norm(h, p("dgcn.out.norm_gain"), p("dgcn.out.norm_shift"));
            let h = tape.relu(normed);
            (project(tape, sample, config.readout, h, p("proj.weight"), p("proj.bias")), None)
        }
    };

    let loss = match &sample.target {
        Some(target) => {
            if target.len() != config.embed_dim {
                return Err(WiceError::DimensionMismatch { expected: config.embed_dim, found: target.len() });
            }
            Some(tape.cosine_loss(z_hat, target))
        }
        None => None,
    };
    Ok((Built { z_hat, weights, last_attention, loss }, vars))
}

fn project<'g>(tape: &mut Tape<'g>, sample: &GraphSample, readout: Readout, h: Var, w: Var, b: Var) -> Var {
    let pooled = match readout {
        Readout::ImageNode => tape.select_row(h, sample.image),
        Readout::Mean => tape.mean_rows(h),
    };
    let projected = tape.matmul(pooled, w);
    tape.add_bias(projected, b)
}

/// Forward pass without gradients.
pub fn predict(params: &ModelParams, sample: &GraphSample) -> Result<Prediction> {
    let mut tape = Tape::new();
    let (built, _) = build(params, sample, &mut tape, false)?;
    let weights = built.weights.map(|w| NodeWeights {
        values: tape.value(w).as_slice().to_vec(),
        text_mask: sample.text_mask.clone(),
    });
    let attention = (!built.last_attention.is_empty()).then(|| {
        let mut avg = vec![0.0; sample.len()];
        let heads = built.last_attention.len() as f64;
        for att in &built.last_attention {
            let alpha = tape.attention_coefficients(*att).expect("attention node");
            for slot in sample.neighbors.slots(sample.image) {
                avg[sample.neighbors.target(slot)] += alpha[slot] / heads;
            }
        }
        avg
    });
    Ok(Prediction {
        z_hat: tape.value(built.z_hat).as_slice().to_vec(),
        weights,
        attention,
        loss: built.loss.map(|l| tape.value(l).as_slice()[0]),
    })
}

/// wGCN forward: per-node weights and their weighted embedding average.
pub fn wgcn_forward(params: &ModelParams, sample: &GraphSample) -> Result<Prediction> {
    if params.config.architecture != Architecture::Wgcn {
        return Err(WiceError::InvalidConfig(format!("expected wgcn, got {}", params.config.architecture)));
    }
    predict(params, sample)
}

/// Forward pass of the gcn, gat and dgcn models.
pub fn plain_forward(params: &ModelParams, sample: &GraphSample) -> Result<Prediction> {
    if params.config.architecture == Architecture::Wgcn {
        return Err(WiceError::InvalidConfig("plain forward does not apply to wgcn".into()));
    }
    predict(params, sample)
}

/// Loss against the page's reference and its gradient for every tensor.
pub fn loss_and_gradients(params: &ModelParams, sample: &GraphSample) -> Result<(f64, Vec<Matrix>)> {
    if sample.target.is_none() {
        return Err(WiceError::MissingReference);
    }
    let mut tape = Tape::new();
    let (built, vars) = build(params, sample, &mut tape, true)?;
    let loss = built.loss.expect("target present");
    let mut grads = tape.backward(loss);
    let value = tape.value(loss).as_slice()[0];
    let out = vars
        .iter()
        .zip(&params.tensors)
        .map(|(v, t)| grads.take(*v).unwrap_or_else(|| Matrix::zeros(t.value.rows(), t.value.cols())))
        .collect();
    Ok((value, out))
}

/// Loss only; used by finite-difference checks and evaluation.
pub fn loss(params: &ModelParams, sample: &GraphSample) -> Result<f64> {
    predict(params, sample)?.loss.ok_or(WiceError::MissingReference)
}
