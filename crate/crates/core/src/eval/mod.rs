//! Context extraction, baselines and the evaluation metrics.

mod baselines;

pub use baselines::{
    baseline_blind, baseline_distance, baseline_oracle, baseline_random, baseline_text_after_image, extract_context,
    extract_context_nodes, most_similar_text_node, ContextRule, RegressionOutput,
};

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dom_graph::DomGraph;
use crate::error::{Result, WiceError};
use crate::featurize::EmbeddingMatrix;
use crate::gnn::loss::cosine_loss;
use crate::gnn::model::{predict, Architecture, GraphSample, ModelParams};

/// Similarity of 0.6 expressed as a cosine loss.
pub const DEFAULT_LOSS_THRESHOLD: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Wgcn,
    Gcn,
    Gat,
    Dgcn,
    Distance,
    Title,
    TextAfterImage,
    Blind,
    Random,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Wgcn,
        Method::Gcn,
        Method::Gat,
        Method::Dgcn,
        Method::Distance,
        Method::Title,
        Method::TextAfterImage,
        Method::Blind,
        Method::Random,
        Method::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Wgcn => "wgcn",
            Method::Gcn => "gcn",
            Method::Gat => "gat",
            Method::Dgcn => "dgcn",
            Method::Distance => "distance",
            Method::Title => "title",
            Method::TextAfterImage => "text_after_image",
            Method::Blind => "blind",
            Method::Random => "random",
            Method::Oracle => "oracle",
        }
    }

    /// The trained model a method needs, if any.
    pub fn architecture(self) -> Option<Architecture> {
        match self {
            Method::Wgcn | Method::Blind => Some(Architecture::Wgcn),
            Method::Gcn => Some(Architecture::Gcn),
            Method::Gat => Some(Architecture::Gat),
            Method::Dgcn => Some(Architecture::Dgcn),
            _ => None,
        }
    }

    pub fn parse_list(list: &str) -> Result<Vec<Method>> {
        if list.trim() == "all" {
            return Ok(Method::ALL.to_vec());
        }
        let mut out: Vec<Method> = list.split(',').map(|m| m.trim().parse()).collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = WiceError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| WiceError::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// One page scored by one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiceResult {
    pub page_id: String,
    pub method: Method,
    pub chosen_node: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weights: Option<Vec<f64>>,
    pub wice_loss: f64,
    pub regression_loss: Option<f64>,
}

/// A page a method could not score, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub page_id: String,
    pub method: Method,
    pub reason: String,
}

/// Everything evaluation needs about one page.
#[derive(Debug, Clone)]
pub struct EvalPage {
    pub graph: DomGraph,
    pub title_vector: Option<Vec<f64>>,
    pub sample: GraphSample,
}

impl EvalPage {
    pub fn new(graph: DomGraph, emb: &EmbeddingMatrix) -> Result<Self> {
        let sample = GraphSample::new(&graph, emb, emb.dim)?;
        Ok(EvalPage { title_vector: emb.title_vector.clone(), graph, sample })
    }

    pub fn target(&self) -> Result<&[f64]> {
        self.sample.target.as_deref().ok_or(WiceError::MissingReference)
    }

    /// Cosine loss of a text node's embedding against the reference.
    pub fn node_loss(&self, node: usize) -> Result<f64> {
        if !self.sample.text_mask.get(node).copied().unwrap_or(false) {
            return Err(WiceError::UnknownNode(node));
        }
        cosine_loss(self.sample.text_embeddings.row(node), self.target()?)
    }
}

/// Trained models available to an evaluation run, one per architecture.
#[derive(Debug, Clone, Default)]
pub struct Models {
    by_arch: BTreeMap<Architecture, ModelParams>,
}

impl Models {
    pub fn new() -> Self {
        Models::default()
    }

    pub fn insert(&mut self, params: ModelParams) {
        self.by_arch.insert(params.config.architecture, params);
    }

    pub fn get(&self, arch: Architecture) -> Option<&ModelParams> {
        self.by_arch.get(&arch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub random_seed: u64,
    pub loss_threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { random_seed: 0, loss_threshold: DEFAULT_LOSS_THRESHOLD }
    }
}

fn model_for(models: &Models, method: Method) -> Result<&ModelParams> {
    let arch = method.architecture().expect("model-backed method");
    models
        .get(arch)
        .ok_or_else(|| WiceError::InvalidConfig(format!("method {method} needs a trained {arch} checkpoint")))
}

/// Score one page with one method.
pub fn evaluate_page(method: Method, page: &EvalPage, models: &Models, options: &EvalOptions) -> Result<WiceResult> {
    let sample = &page.sample;
    let target = page.target()?;
    if !sample.has_text() && method != Method::Title {
        return Err(WiceError::NoTextNodes);
    }
    let chosen = |node: usize, weights: Option<Vec<f64>>, regression_loss: Option<f64>| -> Result<WiceResult> {
        Ok(WiceResult {
            page_id: sample.page_id.clone(),
            method,
            chosen_node: Some(node),
            weights,
            wice_loss: page.node_loss(node)?,
            regression_loss,
        })
    };
    match method {
        Method::Wgcn => {
            let pred = predict(model_for(models, method)?, sample)?;
            let w = pred.weights.expect("wgcn produces weights");
            chosen(extract_context(&w)?, Some(w.values), pred.loss)
        }
        Method::Gcn | Method::Gat | Method::Dgcn => {
            let pred = predict(model_for(models, method)?, sample)?;
            chosen(baseline_blind(&pred.z_hat, sample)?, pred.attention, pred.loss)
        }
        Method::Blind => {
            let pred = predict(model_for(models, method)?, sample)?;
            chosen(baseline_blind(&pred.z_hat, sample)?, None, pred.loss)
        }
        Method::Distance => {
            let out = baseline_distance(&page.graph, sample)?;
            let reg = cosine_loss(&out.z_hat, target)?;
            chosen(extract_context(&out.weights)?, Some(out.weights.values), Some(reg))
        }
        Method::TextAfterImage => chosen(baseline_text_after_image(&page.graph, sample)?, None, None),
        Method::Random => chosen(baseline_random(sample, options.random_seed)?, None, None),
        Method::Oracle => chosen(baseline_oracle(sample)?, None, None),
        Method::Title => {
            let title = page.title_vector.as_deref().ok_or(WiceError::NoTitle)?;
            Ok(WiceResult {
                page_id: sample.page_id.clone(),
                method,
                chosen_node: None,
                weights: None,
                wice_loss: cosine_loss(title, target)?,
                regression_loss: None,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_wice_loss: Option<f64>,
    pub mean_regression_loss: Option<f64>,
    pub pages: usize,
    pub excluded: usize,
    /// Share of included pages with wice_loss at or below the threshold.
    pub within_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub summary: MethodSummary,
    pub records: Vec<WiceResult>,
    pub exclusions: Vec<Exclusion>,
}

/// Page-level errors that exclude a page instead of failing the run.
fn is_exclusion(e: &WiceError) -> bool {
    matches!(e.root(), WiceError::NoTextNodes | WiceError::NoTitle | WiceError::MissingReference)
}

/// Score every page with `method`; records come back in page_id order.
pub fn evaluate_wice(method: Method, pages: &[EvalPage], models: &Models, options: &EvalOptions) -> Result<MethodReport> {
    if pages.is_empty() {
        return Err(WiceError::EmptySet);
    }
    if method.architecture().is_some() {
        model_for(models, method)?;
    }
    let mut outcomes: Vec<(String, std::result::Result<WiceResult, WiceError>)> = pages
        .par_iter()
        .map(|p| (p.sample.page_id.clone(), evaluate_page(method, p, models, options)))
        .collect();
    outcomes.sort_by(|a, b| a.0.cmp(&b.0));
    let mut records = Vec::new();
    let mut exclusions = Vec::new();
    for (page_id, outcome) in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) if is_exclusion(&e) => exclusions.push(Exclusion { page_id, method, reason: e.to_string() }),
            Err(e) => return Err(e.for_page(&page_id)),
        }
    }
    let losses: Vec<f64> = records.iter().map(|r| r.wice_loss).collect();
    let regs: Vec<f64> = records.iter().filter_map(|r| r.regression_loss).collect();
    let summary = MethodSummary {
        method,
        mean_wice_loss: mean(&losses),
        mean_regression_loss: mean(&regs),
        pages: records.len(),
        excluded: exclusions.len(),
        within_threshold: threshold_report(&records, options.loss_threshold),
    };
    Ok(MethodReport { summary, records, exclusions })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Pearson correlation of `(x, y)` pairs.
pub fn pearson(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(WiceError::TooFewSamples { needed: 3, got: pairs.len() });
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(WiceError::DegenerateVariance);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Pearson r between regression loss and wice_loss over records that have both.
pub fn correlate_losses(records: &[WiceResult]) -> Result<f64> {
    let pairs: Vec<(f64, f64)> = records.iter().filter_map(|r| r.regression_loss.map(|reg| (reg, r.wice_loss))).collect();
    pearson(&pairs)
}

/// Fraction of records with `wice_loss ≤ max_loss`; `None` for no records.
pub fn threshold_report(records: &[WiceResult], max_loss: f64) -> Option<f64> {
    (!records.is_empty())
        .then(|| records.iter().filter(|r| r.wice_loss <= max_loss).count() as f64 / records.len() as f64)
}

/// Pages where some method beat the oracle: `(page_id, method, loss, oracle loss)`.
pub fn oracle_violations(records: &[WiceResult]) -> Vec<(String, Method, f64, f64)> {
    let oracle: BTreeMap<&str, f64> =
        records.iter().filter(|r| r.method == Method::Oracle).map(|r| (r.page_id.as_str(), r.wice_loss)).collect();
    records
        .iter()
        .filter_map(|r| {
            let o = *oracle.get(r.page_id.as_str())?;
            (r.wice_loss < o).then(|| (r.page_id.clone(), r.method, r.wice_loss, o))
        })
        .collect()
}

/// One JSON object per line.
pub fn write_results(out: &mut impl Write, records: &[WiceResult]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_results(text: &str, origin: &str) -> Result<Vec<WiceResult>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| WiceError::parse(origin, i + 1, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(reg: f64, loss: f64) -> WiceResult {
        WiceResult {
            page_id: "p".into(),
            method: Method::Wgcn,
            chosen_node: Some(1),
            weights: None,
            wice_loss: loss,
            regression_loss: Some(reg),
        }
    }

    #[test]
    fn pearson_extremes() {
        let lin: Vec<WiceResult> = (0..5).map(|i| rec(i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert!((correlate_losses(&lin).unwrap() - 1.0).abs() < 1e-12);
        let anti: Vec<WiceResult> = (0..5).map(|i| rec(i as f64, -0.5 * i as f64)).collect();
        assert!((correlate_losses(&anti).unwrap() + 1.0).abs() < 1e-12);
        let flat: Vec<WiceResult> = (0..5).map(|i| rec(i as f64, 0.3)).collect();
        assert!(matches!(correlate_losses(&flat), Err(WiceError::DegenerateVariance)));
        assert!(matches!(correlate_losses(&lin[..2]), Err(WiceError::TooFewSamples { .. })));
    }

    #[test]
    fn pearson_hand_series() {
        // Covariance form: x = 1..5, y = (2, 4, 5, 4, 5).
        // mean x 3, mean y 4; Σdxdy = 6, Σdx² = 10, Σdy² = 6.
        let pairs = [(1.0, 2.0), (2.0, 4.0), (3.0, 5.0), (4.0, 4.0), (5.0, 5.0)];
        let expected = 6.0 / (10.0f64.sqrt() * 6.0f64.sqrt());
        assert!((pearson(&pairs).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn threshold_fractions() {
        let zeros: Vec<WiceResult> = (0..4).map(|_| rec(0.0, 0.0)).collect();
        assert_eq!(threshold_report(&zeros, 0.4), Some(1.0));
        let ones: Vec<WiceResult> = (0..4).map(|_| rec(0.0, 1.0)).collect();
        assert_eq!(threshold_report(&ones, 0.4), Some(0.0));
        let mixed: Vec<WiceResult> = [0.1, 0.4, 0.41, 0.9, 0.2].iter().map(|l| rec(0.0, *l)).collect();
        assert_eq!(threshold_report(&mixed, 0.4), Some(3.0 / 5.0));
        assert_eq!(threshold_report(&[], 0.4), None);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert_eq!(Method::parse_list("oracle,wgcn,oracle").unwrap(), vec![Method::Wgcn, Method::Oracle]);
        assert!(Method::parse_list("wgcn,nope").is_err());
    }

    #[test]
    fn results_round_trip() {
        let mut buf = Vec::new();
        let records = vec![rec(0.25, 0.5), WiceResult { weights: Some(vec![0.0, 1.0]), ..rec(0.1, 0.2) }];
        write_results(&mut buf, &records).unwrap();
        assert_eq!(read_results(&String::from_utf8(buf).unwrap(), "mem").unwrap(), records);
    }
}
