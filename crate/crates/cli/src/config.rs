//! Run configuration: one TOML file plus command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wice_core::dom_graph::{Denylist, GraphOptions, PreprocessOptions};
use wice_core::eval::{EvalOptions, Method, DEFAULT_LOSS_THRESHOLD};
use wice_core::featurize::DEFAULT_DIM;
use wice_core::gnn::{Architecture, ModelConfig, OptimizerKind, Readout, WeightMode};
use wice_core::training::{SplitMode, SplitSpec, TrainConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Hashed,
    Cache,
}

/// Every tunable of the pipeline. Paths are not part of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub pages: usize,
    pub sites: usize,
    pub min_text_chars: usize,
    /// Replaces the built-in tag denylist when set.
    pub denylist: Option<Vec<String>>,
    pub provider: ProviderKind,
    pub dim: usize,
    pub arch: Architecture,
    pub split: SplitMode,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub patience: usize,
    pub accumulate: usize,
    pub hidden: Option<Vec<usize>>,
    pub heads: Option<usize>,
    pub depth: Option<usize>,
    pub width: Option<usize>,
    pub weight_mode: WeightMode,
    pub readout: Readout,
    pub methods: String,
    pub loss_threshold: f64,
    /// Largest tolerated fraction of failed or excluded items per stage.
    pub max_error_rate: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::new(Architecture::Wgcn, DEFAULT_DIM, 0);
        let train = TrainConfig::new(model.clone());
        RunConfig {
            seed: 0,
            pages: 200,
            sites: 10,
            min_text_chars: GraphOptions::default().min_text_chars,
            denylist: None,
            provider: ProviderKind::Hashed,
            dim: DEFAULT_DIM,
            arch: Architecture::Wgcn,
            split: SplitMode::ByPage,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            optimizer: train.optimizer,
            patience: train.patience,
            accumulate: train.accumulate,
            hidden: None,
            heads: None,
            depth: None,
            width: None,
            weight_mode: model.weight_mode,
            readout: model.readout,
            methods: "wgcn,blind,distance,title,text_after_image,random,oracle".into(),
            loss_threshold: DEFAULT_LOSS_THRESHOLD,
            max_error_rate: 0.5,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config { path: origin.to_string(), message: e.to_string() })
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Usage(m.to_string()));
        if !(0.0..=1.0).contains(&self.max_error_rate) {
            return bad("max_error_rate must lie in [0, 1]");
        }
        if !(self.loss_threshold >= 0.0 && self.loss_threshold <= 2.0) {
            return bad("loss_threshold must lie in [0, 2]");
        }
        if self.pages == 0 || self.sites == 0 {
            return bad("pages and sites must be positive");
        }
        Method::parse_list(&self.methods)?;
        self.train_config(self.dim)?.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    /// The same config with the embedding width of an existing artifact.
    pub fn with_dim(&self, dim: usize) -> Self {
        RunConfig { dim, ..self.clone() }
    }

    pub fn preprocess_options(&self) -> PreprocessOptions {
        PreprocessOptions {
            denylist: self.denylist.as_ref().map(Denylist::new).unwrap_or_default(),
            graph: GraphOptions { min_text_chars: self.min_text_chars },
        }
    }

    pub fn model_config(&self, dim: usize) -> ModelConfig {
        let mut m = ModelConfig::new(self.arch, dim, self.seed);
        if let Some(h) = &self.hidden {
            m.hidden = h.clone();
        }
        if let Some(h) = self.heads {
            m.heads = h;
        }
        if let Some(d) = self.depth {
            m.depth = d;
        }
        if let Some(w) = self.width {
            m.width = w;
        }
        m.weight_mode = self.weight_mode;
        m.readout = self.readout;
        m
    }

    pub fn train_config(&self, dim: usize) -> CliResult<TrainConfig> {
        let mut t = TrainConfig::new(self.model_config(dim));
        t.epochs = self.epochs;
        t.learning_rate = self.learning_rate;
        t.optimizer = self.optimizer;
        t.patience = self.patience;
        t.accumulate = self.accumulate;
        t.seed = self.seed;
        Ok(t)
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec::new(self.split, self.seed)
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions { random_seed: self.seed, loss_threshold: self.loss_threshold }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("", "x").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn file_values_and_unknown_keys() {
        let c = RunConfig::parse("seed = 4\ndim = 64\narch = \"gat\"\nsplit = \"by_site\"\nhidden = [8, 4]\n", "x")
            .unwrap();
        assert_eq!((c.seed, c.dim, c.arch, c.split), (4, 64, Architecture::Gat, SplitMode::BySite));
        assert_eq!(c.model_config(64).hidden, vec![8, 4]);
        assert!(matches!(RunConfig::parse("sed = 4", "x"), Err(CliError::Config { .. })));
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.learning_rate *= 2.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = RunConfig::default();
        c.max_error_rate = 1.5;
        assert!(matches!(c.validate(), Err(CliError::Usage(_))));
        let mut c = RunConfig::default();
        c.methods = "wgcn,nope".into();
        assert!(c.validate().is_err());
    }
}
