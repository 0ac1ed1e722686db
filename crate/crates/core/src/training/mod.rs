//! Dataset splits, the training loop and regression evaluation.

mod split;

pub use split::{split_dataset, Split, SplitMode, SplitSpec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WiceError};
use crate::gnn::checkpoint::Checkpoint;
use crate::gnn::model::{self, GraphSample, ModelConfig, ModelParams};
use crate::gnn::optim::{Optimizer, OptimizerKind};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    /// Pages whose gradients are averaged into one update.
    pub accumulate: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        let seed = model.seed;
        TrainConfig {
            model,
            epochs: 100,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            patience: 10,
            accumulate: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(WiceError::InvalidConfig("learning rate must be positive".into()));
        }
        if self.accumulate == 0 {
            return Err(WiceError::InvalidConfig("accumulate must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of the metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetric {
    pub epoch: usize,
    pub split: String,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Lowest validation loss seen, including the starting point.
    pub best: Checkpoint,
    pub best_valid_loss: Option<f64>,
    /// State after the final epoch run.
    pub last: Checkpoint,
    pub metrics: Vec<EpochMetric>,
    /// Training pages dropped for having no text nodes or no reference.
    pub skipped: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub mean_loss: f64,
    pub pages: usize,
    pub excluded: usize,
    pub per_page: Vec<(String, f64)>,
}

fn usable(s: &GraphSample) -> bool {
    s.has_text() && s.target.is_some()
}

/// Mean cosine loss of `params` over `samples`, excluding (and counting)
/// pages without text nodes or without a reference.
pub fn evaluate_regression(params: &ModelParams, samples: &[GraphSample]) -> Result<RegressionReport> {
    let results: Vec<Option<(String, f64)>> = samples
        .par_iter()
        .map(|s| {
            if !usable(s) {
                return Ok(None);
            }
            model::loss(params, s).map(|l| Some((s.page_id.clone(), l)))
        })
        .collect::<Result<_>>()?;
    let excluded = results.iter().filter(|r| r.is_none()).count();
    let per_page: Vec<(String, f64)> = results.into_iter().flatten().collect();
    if per_page.is_empty() {
        return Err(WiceError::EmptySet);
    }
    let mean_loss = per_page.iter().map(|(_, l)| l).sum::<f64>() / per_page.len() as f64;
    Ok(RegressionReport { mean_loss, pages: per_page.len(), excluded, per_page })
}

fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    order.shuffle(&mut rng);
    order
}

fn snapshot(params: &ModelParams, opt: &Optimizer, epoch: usize, provider_id: &str, config_hash: &str) -> Checkpoint {
    Checkpoint {
        params: params.clone(),
        provider_id: provider_id.to_string(),
        config_hash: config_hash.to_string(),
        epoch,
        optimizer: Some(opt.clone()),
    }
}

/// Train on `train`, selecting by mean loss on `valid` (or on the training
/// loss when `valid` is empty). `resume` continues from a checkpoint's
/// weights, optimizer state and epoch counter.
pub fn train(
    train_set: &[GraphSample],
    valid_set: &[GraphSample],
    config: &TrainConfig,
    resume: Option<Checkpoint>,
    provider_id: &str,
    config_hash: &str,
) -> Result<TrainOutcome> {
    config.validate()?;
    let usable_train: Vec<&GraphSample> = train_set.iter().filter(|s| usable(s)).collect();
    let skipped = train_set.len() - usable_train.len();
    if skipped > 0 {
        log::info!("skipping {skipped} training pages without text nodes or reference");
    }
    if usable_train.is_empty() {
        return Err(WiceError::EmptySet);
    }

    let (mut params, mut opt, start_epoch) = match resume {
        Some(ckpt) => {
            if ckpt.params.config != config.model {
                return Err(WiceError::Checkpoint("resumed checkpoint has a different model config".into()));
            }
            let opt = match ckpt.optimizer {
                Some(o) if o.kind == config.optimizer => Optimizer { lr: config.learning_rate, ..o },
                _ => Optimizer::new(config.optimizer, config.learning_rate, &ckpt.params),
            };
            (ckpt.params, opt, ckpt.epoch)
        }
        None => {
            let params = ModelParams::init(config.model.clone())?;
            let opt = Optimizer::new(config.optimizer, config.learning_rate, &params);
            (params, opt, 0)
        }
    };

    let validate = |p: &ModelParams| -> Result<Option<f64>> {
        if valid_set.is_empty() {
            return Ok(None);
        }
        match evaluate_regression(p, valid_set) {
            Ok(r) => Ok(Some(r.mean_loss)),
            Err(WiceError::EmptySet) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let mut metrics = Vec::new();
    let mut best_valid = validate(&params)?;
    let mut best = snapshot(&params, &opt, start_epoch, provider_id, config_hash);
    let mut best_train = f64::INFINITY;
    let mut stale = 0;
    let mut stopped_early = false;
    let mut epoch = start_epoch;

    while epoch < config.epochs {
        epoch += 1;
        let order = epoch_order(config.seed, epoch, usable_train.len());
        let mut total = 0.0;
        for chunk in order.chunks(config.accumulate) {
            let results: Vec<(f64, Vec<Matrix>)> = chunk
                .par_iter()
                .map(|&i| {
                    model::loss_and_gradients(&params, usable_train[i])
                        .map_err(|e| e.for_page(&usable_train[i].page_id))
                })
                .collect::<Result<_>>()?;
            let mut grads = params.zeros_like();
            for (loss, g) in &results {
                total += loss;
                for (acc, gi) in grads.iter_mut().zip(g) {
                    acc.add_assign(gi);
                }
            }
            if chunk.len() > 1 {
                for g in &mut grads {
                    g.scale(1.0 / chunk.len() as f64);
                }
            }
            if let Err(WiceError::NonFiniteGradient { param, .. }) = opt.update(&mut params, &grads) {
                let pages: Vec<&str> = chunk.iter().map(|&i| usable_train[i].page_id.as_str()).collect();
                return Err(WiceError::NonFiniteGradient { param, context: Some(pages.join(",")) });
            }
        }
        let train_loss = total / usable_train.len() as f64;
        metrics.push(EpochMetric { epoch, split: "train".into(), mean_loss: train_loss });
        let valid_loss = validate(&params)?;
        if let Some(v) = valid_loss {
            metrics.push(EpochMetric { epoch, split: "valid".into(), mean_loss: v });
        }
        log::debug!("epoch {epoch}: train {train_loss:.5} valid {valid_loss:?}");

        let improved = match (valid_loss, best_valid) {
            (Some(v), Some(b)) => v < b,
            (Some(_), None) => true,
            (None, _) => train_loss < best_train,
        };
        best_train = best_train.min(train_loss);
        if improved {
            best_valid = valid_loss;
            best = snapshot(&params, &opt, epoch, provider_id, config_hash);
            stale = 0;
        } else {
            stale += 1;
            if config.patience > 0 && stale >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let last = snapshot(&params, &opt, epoch, provider_id, config_hash);
    Ok(TrainOutcome { best, best_valid_loss: best_valid, last, metrics, skipped, stopped_early })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom_graph::{preprocess_page, PageRecord, PreprocessOptions};
    use crate::featurize::{embed_graph, HashedProvider};
    use crate::gnn::model::Architecture;

    fn sample(id: &str, html: &str, dim: usize) -> GraphSample {
        let page = PageRecord {
            page_id: id.into(),
            site_id: "s".into(),
            url: String::new(),
            html: html.as_bytes().to_vec(),
            language_hint: None,
        };
        let g = preprocess_page(&page, &PreprocessOptions::default()).unwrap();
        let emb = embed_graph(&g, &HashedProvider::new(dim, 0).unwrap()).unwrap();
        GraphSample::new(&g, &emb, dim).unwrap()
    }

    fn page(i: usize) -> String {
        let topics = ["harbour storm", "city budget vote", "football final", "museum opening", "rail strike"];
        let t = topics[i % topics.len()];
        format!(
            r#"<body><article><h1>news {i}</h1><figure><img width=100 height=80 alt="{t} photo"><span>credit agency</span></figure>
            <p>{t} photo shows the scene</p><p>unrelated words about weather</p><p>subscribe to the newsletter</p></article></body>"#
        )
    }

    fn config(arch: Architecture, dim: usize) -> TrainConfig {
        let mut c = TrainConfig::new(ModelConfig::new(arch, dim, 0));
        c.model.hidden = if arch == Architecture::Gat { vec![8, 8] } else { vec![32, 16] };
        c.learning_rate = 0.01;
        c
    }

    #[test]
    fn overfits_identical_pages() {
        let dim = 32;
        // One paragraph repeats the caption, so a loss of zero is reachable.
        let html = page(0).replace("photo shows the scene", "photo");
        let set: Vec<GraphSample> = (0..10).map(|i| sample(&format!("p{i}"), &html, dim)).collect();
        let mut c = config(Architecture::Wgcn, dim);
        c.epochs = 50;
        c.patience = 0;
        let out = train(&set, &[], &c, None, "hashed-d32-s0", "h").unwrap();
        let last = out.metrics.iter().rev().find(|m| m.split == "train").unwrap();
        assert!(last.mean_loss < 0.05, "{}", last.mean_loss);
    }

    #[test]
    fn loss_drops_on_a_fixed_corpus() {
        let dim = 32;
        let set: Vec<GraphSample> = (0..20).map(|i| sample(&format!("p{i}"), &page(i), dim)).collect();
        let mut c = config(Architecture::Wgcn, dim);
        c.epochs = 100;
        c.patience = 0;
        c.learning_rate = 1e-3;
        let out = train(&set, &[], &c, None, "x", "h").unwrap();
        let train_losses: Vec<f64> = out.metrics.iter().filter(|m| m.split == "train").map(|m| m.mean_loss).collect();
        assert_eq!(train_losses.len(), 100);
        assert!(train_losses[99] < train_losses[0]);
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let dim = 16;
        let set = vec![sample("a", &page(1), dim)];
        let mut c = config(Architecture::Gcn, dim);
        c.epochs = 0;
        let out = train(&set, &set, &c, None, "x", "h").unwrap();
        assert_eq!(out.best.params, ModelParams::init(c.model.clone()).unwrap());
        assert!(out.metrics.is_empty());
    }

    #[test]
    fn same_seed_same_curves_and_resume_matches() {
        let dim = 16;
        let set: Vec<GraphSample> = (0..6).map(|i| sample(&format!("p{i}"), &page(i), dim)).collect();
        let (tr, va) = set.split_at(4);
        for arch in Architecture::ALL {
            let mut c = config(arch, dim);
            c.epochs = 4;
            c.patience = 0;
            c.accumulate = 2;
            let a = train(tr, va, &c, None, "x", "h").unwrap();
            let b = train(tr, va, &c, None, "x", "h").unwrap();
            assert_eq!(a.metrics, b.metrics, "{arch}");
            assert_eq!(a.last.to_bytes(), b.last.to_bytes());

            let mut half = c.clone();
            half.epochs = 2;
            let first = train(tr, va, &half, None, "x", "h").unwrap();
            let resumed = train(tr, va, &c, Some(first.last), "x", "h").unwrap();
            assert_eq!(resumed.last.params, a.last.params, "{arch}");
        }
    }

    #[test]
    fn perfect_regression_scores_zero() {
        let dim = 16;
        let mut s = sample("a", &page(0), dim);
        let t = s.text_nodes().next().unwrap();
        s.text_mask = s.text_mask.iter().enumerate().map(|(i, _)| i == t).collect();
        s.target = Some(s.text_embeddings.row(t).to_vec());
        let params = ModelParams::init(ModelConfig::new(Architecture::Wgcn, dim, 0)).unwrap();
        let r = evaluate_regression(&params, &[s]).unwrap();
        assert!(r.mean_loss.abs() < 1e-12);
        assert_eq!(r.pages, 1);
    }
}
