//! The six pipeline stages.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;
use wice_core::dom_graph::{
    load_page, preprocess_page, preprocess_unlabeled, read_graphs, read_manifest, write_graphs, write_manifest,
    DomGraph,
};
use wice_core::error::{Result, WiceError};
use wice_core::eval::{
    baseline_blind, correlate_losses, evaluate_wice, extract_context_nodes, oracle_violations, threshold_report,
    write_results, ContextRule, EvalPage, Method, MethodSummary, Models,
};
use wice_core::featurize::{embed_graph, unique_texts, EmbeddingCache, EmbeddingProvider, HashedProvider};
use wice_core::gnn::{predict, Checkpoint, GraphSample};
use wice_core::synth::{generate_corpus, GROUND_TRUTH_FILE, MANIFEST_FILE};
use wice_core::training::{split_dataset, train, Split};

use crate::artifacts::{check_lineage, read_artifact, require, sha256_hex, write_atomic, ArtifactMeta, Provenance};
use crate::config::{ProviderKind, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthArgs {
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessArgs {
    pub corpus: PathBuf,
    /// Defaults to `manifest.tsv` inside the corpus directory.
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedArgs {
    pub graphs: PathBuf,
    pub cache: Option<PathBuf>,
    /// Dimension requested on the command line, checked against a cache.
    pub expect_dim: Option<usize>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainArgs {
    pub graphs: PathBuf,
    pub embeddings: PathBuf,
    pub out: PathBuf,
    pub metrics: PathBuf,
    /// Defaults to the checkpoint path with `.split.json` appended.
    pub split_file: Option<PathBuf>,
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Part {
    Train,
    Valid,
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateArgs {
    pub graphs: PathBuf,
    pub embeddings: PathBuf,
    pub ckpts: Vec<PathBuf>,
    pub split_file: PathBuf,
    pub part: Part,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractArgs {
    pub ckpt: PathBuf,
    pub html: PathBuf,
    pub cache: Option<PathBuf>,
    pub top_k: Option<usize>,
    pub min_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Synth(SynthArgs),
    Preprocess(PreprocessArgs),
    Embed(EmbedArgs),
    Train(TrainArgs),
    Evaluate(EvaluateArgs),
    Extract(ExtractArgs),
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Synth(_) => "synth",
            Stage::Preprocess(_) => "preprocess",
            Stage::Embed(_) => "embed",
            Stage::Train(_) => "train",
            Stage::Evaluate(_) => "evaluate",
            Stage::Extract(_) => "extract",
        }
    }
}

/// What a stage reports back to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    /// Text for standard output.
    pub stdout: String,
    pub report: serde_json::Value,
}

/// Run one stage with a resolved config.
pub fn run_stage(stage: &Stage, config: &RunConfig) -> CliResult<StageOutput> {
    config.validate()?;
    let started = Instant::now();
    let out = match stage {
        Stage::Synth(a) => synth(a, config),
        Stage::Preprocess(a) => preprocess(a, config),
        Stage::Embed(a) => embed(a, config),
        Stage::Train(a) => train_stage(a, config),
        Stage::Evaluate(a) => evaluate(a, config),
        Stage::Extract(a) => extract(a, config),
    }?;
    log::info!("stage={} seconds={:.3}", stage.name(), started.elapsed().as_secs_f64());
    Ok(out)
}

fn check_rate(stage: &str, failed: usize, total: usize, limit: f64) -> CliResult<()> {
    if total == 0 {
        return Ok(());
    }
    let rate = failed as f64 / total as f64;
    if rate > limit {
        return Err(CliError::ErrorRate { stage: stage.into(), failed, total, rate, limit });
    }
    Ok(())
}

fn error_kind(e: &WiceError) -> String {
    let debug = format!("{:?}", e.root());
    debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Unknown").to_string()
}

fn synth(args: &SynthArgs, config: &RunConfig) -> CliResult<StageOutput> {
    let corpus = generate_corpus(config.pages, config.sites, config.seed)?;
    corpus.pages.par_iter().try_for_each(|p| {
        write_atomic(&args.out.join(format!("{}.html", p.record.page_id)), &p.record.html)
    })?;
    write_atomic(&args.out.join(GROUND_TRUTH_FILE), corpus.ground_truth().as_bytes())?;
    let mut manifest = Vec::new();
    write_manifest(&mut manifest, &corpus.manifest()).map_err(|e| WiceError::io(&args.out, e))?;
    let report = json!({ "pages": corpus.pages.len(), "sites": corpus.templates.len() });
    Provenance::new("manifest", "synth", config, &[]).write(&args.out.join(MANIFEST_FILE), &manifest, report.clone())?;
    Ok(StageOutput {
        stdout: format!("wrote {} pages from {} sites to {}\n", corpus.pages.len(), corpus.templates.len(), args.out.display()),
        report,
    })
}

fn preprocess(args: &PreprocessArgs, config: &RunConfig) -> CliResult<StageOutput> {
    require("corpus directory", &args.corpus)?;
    let manifest_path = args.manifest.clone().unwrap_or_else(|| args.corpus.join(MANIFEST_FILE));
    require("manifest", &manifest_path)?;
    let upstream = if crate::artifacts::meta_path(&manifest_path).exists() {
        Some(read_artifact("manifest", &manifest_path)?.1)
    } else {
        None
    };
    let entries = read_manifest(&manifest_path)?;
    if entries.is_empty() {
        return Err(WiceError::EmptyCorpus.into());
    }
    let options = config.preprocess_options();
    let started = Instant::now();
    let results: Vec<Result<DomGraph>> = entries
        .par_iter()
        .map(|e| load_page(&args.corpus, e).and_then(|p| preprocess_page(&p, &options)))
        .collect();
    let elapsed = started.elapsed().as_secs_f64();
    let mut graphs = Vec::with_capacity(results.len());
    let mut rejected: BTreeMap<String, usize> = BTreeMap::new();
    for (entry, r) in entries.iter().zip(results) {
        match r {
            Ok(g) => graphs.push(g),
            Err(e) => {
                log::warn!("page={} rejected: {e}", entry.page_id);
                *rejected.entry(error_kind(&e)).or_default() += 1;
            }
        }
    }
    let failed: usize = rejected.values().sum();
    log::info!("stage=preprocess pages={} kept={} pages_per_sec={:.1}", entries.len(), graphs.len(), entries.len() as f64 / elapsed.max(1e-9));
    check_rate("preprocess", failed, entries.len(), config.max_error_rate)?;
    if graphs.is_empty() {
        return Err(WiceError::EmptyCorpus.into());
    }
    let mut bytes = Vec::new();
    write_graphs(&mut bytes, &graphs).map_err(|e| WiceError::io(&args.out, e))?;
    let report = json!({ "pages": entries.len(), "graphs": graphs.len(), "rejected": rejected });
    let inputs: Vec<&ArtifactMeta> = upstream.iter().collect();
    Provenance::new("graphs", "preprocess", config, &inputs).write(&args.out, &bytes, report.clone())?;
    Ok(StageOutput {
        stdout: format!("preprocessed {} of {} pages into {}\n", graphs.len(), entries.len(), args.out.display()),
        report,
    })
}

fn load_graphs(path: &Path) -> CliResult<(Vec<DomGraph>, ArtifactMeta)> {
    let (_, meta) = read_artifact("graphs", path)?;
    Ok((read_graphs(path)?, meta))
}

fn embed(args: &EmbedArgs, config: &RunConfig) -> CliResult<StageOutput> {
    let (graphs, gmeta) = load_graphs(&args.graphs)?;
    let texts = unique_texts(&graphs);
    let started = Instant::now();
    let (cache, renormalized) = match config.provider {
        ProviderKind::Hashed => (EmbeddingCache::build(&HashedProvider::new(config.dim, config.seed)?, &texts)?, 0),
        ProviderKind::Cache => {
            let path = args
                .cache
                .as_ref()
                .ok_or_else(|| CliError::Usage("--provider cache needs --cache FILE".into()))?;
            require("embedding cache", path)?;
            let (full, load) = EmbeddingCache::read(path)?;
            if let Some(d) = args.expect_dim {
                if d != full.dim() {
                    return Err(WiceError::DimensionMismatch { expected: d, found: full.dim() }.into());
                }
            }
            (full.subset(&texts)?, load.renormalized)
        }
    };
    log::info!(
        "stage=embed graphs={} texts={} pages_per_sec={:.1}",
        graphs.len(),
        texts.len(),
        graphs.len() as f64 / started.elapsed().as_secs_f64().max(1e-9)
    );
    let mut bytes = Vec::new();
    cache.write(&mut bytes).map_err(|e| WiceError::io(&args.out, e))?;
    let report = json!({
        "texts": cache.len(),
        "dim": cache.dim(),
        "provider": cache.provider_id(),
        "renormalized": renormalized,
    });
    Provenance::new("embeddings", "embed", config, &[&gmeta]).write(&args.out, &bytes, report.clone())?;
    Ok(StageOutput {
        stdout: format!("embedded {} texts with {} into {}\n", cache.len(), cache.provider_id(), args.out.display()),
        report,
    })
}

fn load_embeddings(path: &Path, graphs: &ArtifactMeta) -> CliResult<(EmbeddingCache, ArtifactMeta)> {
    let (bytes, meta) = read_artifact("embeddings", path)?;
    check_lineage(&meta, graphs)?;
    let (cache, _) = EmbeddingCache::read_from(&bytes[..], &path.display().to_string())?;
    Ok((cache, meta))
}

fn samples(graphs: &[DomGraph], cache: &EmbeddingCache) -> CliResult<Vec<GraphSample>> {
    Ok(graphs
        .par_iter()
        .map(|g| {
            embed_graph(g, cache).and_then(|e| GraphSample::new(g, &e, cache.dim())).map_err(|e| e.for_page(&g.page_id))
        })
        .collect::<Result<Vec<_>>>()?)
}

fn split_path(args: &TrainArgs) -> PathBuf {
    args.split_file.clone().unwrap_or_else(|| {
        let mut s = args.out.as_os_str().to_owned();
        s.push(".split.json");
        PathBuf::from(s)
    })
}

fn part<'a, T>(items: &'a [T], ids: &[String], id: impl Fn(&T) -> &str) -> Vec<&'a T> {
    let keep: HashSet<&str> = ids.iter().map(String::as_str).collect();
    items.iter().filter(|x| keep.contains(id(x))).collect()
}

fn train_stage(args: &TrainArgs, config: &RunConfig) -> CliResult<StageOutput> {
    let (graphs, gmeta) = load_graphs(&args.graphs)?;
    let (cache, emeta) = load_embeddings(&args.embeddings, &gmeta)?;
    let config = &config.with_dim(cache.dim());
    let resume = match &args.resume {
        Some(path) => {
            let (bytes, rmeta) = read_artifact("checkpoint", path)?;
            check_lineage(&rmeta, &gmeta)?;
            check_lineage(&rmeta, &emeta)?;
            Some(Checkpoint::read_from(&bytes[..], &path.display().to_string())?)
        }
        None => None,
    };
    let all = samples(&graphs, &cache)?;
    let ids: Vec<(String, String)> = graphs.iter().map(|g| (g.page_id.clone(), g.site_id.clone())).collect();
    let split = split_dataset(&ids, &config.split_spec())?;
    let train_set: Vec<GraphSample> = part(&all, &split.train, |s| &s.page_id).into_iter().cloned().collect();
    let valid_set: Vec<GraphSample> = part(&all, &split.valid, |s| &s.page_id).into_iter().cloned().collect();
    let train_config = config.train_config(cache.dim())?;

    let prov = Provenance::new("checkpoint", "train", config, &[&gmeta, &emeta]);
    let outcome = train(&train_set, &valid_set, &train_config, resume, cache.provider_id(), &prov.config_hash)?;
    check_rate("train", outcome.skipped, train_set.len(), config.max_error_rate)?;

    let mut split_bytes = serde_json::to_vec_pretty(&split).expect("split serializes");
    split_bytes.push(b'\n');
    let split_digest = sha256_hex(&split_bytes);
    let mut metrics = Vec::new();
    for m in &outcome.metrics {
        serde_json::to_writer(&mut metrics, m).expect("metric serializes");
        metrics.push(b'\n');
    }
    let report = json!({
        "architecture": train_config.model.architecture,
        "pages": { "train": split.train.len(), "valid": split.valid.len(), "test": split.test.len() },
        "epochs_run": outcome.last.epoch,
        "best_epoch": outcome.best.epoch,
        "best_valid_loss": outcome.best_valid_loss,
        "stopped_early": outcome.stopped_early,
        "skipped": outcome.skipped,
        "split_sha256": split_digest,
    });
    let sp = split_path(args);
    prov.sibling("split").write(&sp, &split_bytes, serde_json::Value::Null)?;
    prov.sibling("metrics").write(&args.metrics, &metrics, serde_json::Value::Null)?;
    prov.write(&args.out, &outcome.best.to_bytes(), report.clone())?;
    let mut stdout = String::new();
    let _ = writeln!(
        stdout,
        "trained {} for {} epochs, best epoch {}{}",
        train_config.model.architecture,
        outcome.last.epoch,
        outcome.best.epoch,
        outcome.best_valid_loss.map(|l| format!(", valid loss {l:.4}")).unwrap_or_default()
    );
    let _ = writeln!(stdout, "checkpoint {}\nsplit {}\nmetrics {}", args.out.display(), sp.display(), args.metrics.display());
    Ok(StageOutput { stdout, report })
}

fn evaluate(args: &EvaluateArgs, config: &RunConfig) -> CliResult<StageOutput> {
    let (graphs, gmeta) = load_graphs(&args.graphs)?;
    let (cache, emeta) = load_embeddings(&args.embeddings, &gmeta)?;
    let config = &config.with_dim(cache.dim());
    let (split_bytes, smeta) = read_artifact("split", &args.split_file)?;
    check_lineage(&smeta, &gmeta)?;
    let split: Split = serde_json::from_slice(&split_bytes)
        .map_err(|e| WiceError::parse(args.split_file.display().to_string(), 1, e.to_string()))?;
    let split_digest = sha256_hex(&split_bytes);

    let mut models = Models::new();
    let mut inputs: BTreeMap<String, String> = BTreeMap::new();
    for m in [&gmeta, &emeta, &smeta] {
        inputs.insert(m.artifact.clone(), m.config_hash.clone());
    }
    for path in &args.ckpts {
        let (bytes, cmeta) = read_artifact("checkpoint", path)?;
        check_lineage(&cmeta, &gmeta)?;
        check_lineage(&cmeta, &emeta)?;
        let recorded = cmeta.report.get("split_sha256").and_then(|v| v.as_str()).unwrap_or_default();
        if recorded != split_digest {
            return Err(CliError::LineageMismatch {
                artifact: format!("checkpoint {}", path.display()),
                input: "split".into(),
                recorded: recorded.to_string(),
                actual: split_digest.clone(),
            });
        }
        let ckpt = Checkpoint::read_from(&bytes[..], &path.display().to_string())?;
        if ckpt.config_hash != cmeta.config_hash {
            return Err(CliError::Metadata {
                path: path.clone(),
                message: "checkpoint header and metadata disagree on the config hash".into(),
            });
        }
        if ckpt.provider_id != cache.provider_id() {
            return Err(WiceError::ProviderMismatch {
                expected: cache.provider_id().to_string(),
                found: ckpt.provider_id.clone(),
            }
            .into());
        }
        let arch = ckpt.params.config.architecture;
        inputs.insert(format!("checkpoint.{arch}"), cmeta.config_hash.clone());
        models.insert(ckpt.params);
    }

    let methods = Method::parse_list(&config.methods)?;
    for m in &methods {
        if let Some(arch) = m.architecture() {
            if models.get(arch).is_none() {
                return Err(CliError::missing(&format!("{arch} checkpoint"), "--ckpt"));
            }
        }
    }
    let ids: Vec<String> = match args.part {
        Part::Train => split.train.clone(),
        Part::Valid => split.valid.clone(),
        Part::Test => split.test.clone(),
        Part::All => graphs.iter().map(|g| g.page_id.clone()).collect(),
    };
    let selected = part(&graphs, &ids, |g| &g.page_id);
    let pages: Vec<EvalPage> = selected
        .par_iter()
        .map(|g| embed_graph(g, &cache).and_then(|e| EvalPage::new((*g).clone(), &e)).map_err(|e| e.for_page(&g.page_id)))
        .collect::<Result<_>>()?;
    if pages.is_empty() {
        return Err(WiceError::EmptySet.into());
    }

    let options = config.eval_options();
    let mut records = Vec::new();
    let mut summaries: Vec<MethodSummary> = Vec::new();
    let mut excluded = 0;
    let mut thresholds = BTreeMap::new();
    let mut correlation = BTreeMap::new();
    for &m in &methods {
        let r = evaluate_wice(m, &pages, &models, &options)?;
        excluded += r.exclusions.len();
        thresholds.insert(m.as_str(), threshold_report(&r.records, options.loss_threshold));
        if m.architecture().is_some() && m != Method::Blind {
            correlation.insert(m.as_str(), correlate_losses(&r.records).ok());
        }
        summaries.push(r.summary);
        records.extend(r.records);
    }
    let violations = if methods.contains(&Method::Oracle) { Some(oracle_violations(&records).len()) } else { None };
    check_rate("evaluate", excluded, pages.len() * methods.len(), config.max_error_rate)?;

    let mut bytes = Vec::new();
    write_results(&mut bytes, &records).map_err(|e| WiceError::io(&args.out, e))?;
    let report = json!({
        "pages": pages.len(),
        "summaries": summaries,
        "within_threshold": thresholds,
        "loss_threshold": options.loss_threshold,
        "pearson": correlation,
        "oracle_violations": violations,
    });
    Provenance::with_inputs("results", "evaluate", config, inputs).write(&args.out, &bytes, report.clone())?;

    let mut stdout = String::new();
    let _ = writeln!(stdout, "{:<18} {:>10} {:>10} {:>6} {:>8}", "method", "wice_loss", "regression", "pages", "excluded");
    let mut sorted = summaries.clone();
    sorted.sort_by(|a, b| a.mean_wice_loss.unwrap_or(f64::INFINITY).total_cmp(&b.mean_wice_loss.unwrap_or(f64::INFINITY)));
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    for s in &sorted {
        let _ = writeln!(
            stdout,
            "{:<18} {:>10} {:>10} {:>6} {:>8}",
            s.method.as_str(),
            fmt(s.mean_wice_loss),
            fmt(s.mean_regression_loss),
            s.pages,
            s.excluded
        );
    }
    for (m, r) in &correlation {
        let _ = writeln!(stdout, "pearson({m}) {}", fmt(*r));
    }
    if let Some(v) = violations {
        let _ = writeln!(stdout, "oracle violations {v}");
    }
    Ok(StageOutput { stdout, report })
}

fn extract(args: &ExtractArgs, config: &RunConfig) -> CliResult<StageOutput> {
    require("checkpoint", &args.ckpt)?;
    require("html page", &args.html)?;
    let ckpt = Checkpoint::read(&args.ckpt)?;
    let provider: Box<dyn EmbeddingProvider> = match &args.cache {
        Some(path) => {
            require("embedding cache", path)?;
            let (cache, _) = EmbeddingCache::read(path)?;
            if cache.provider_id() != ckpt.provider_id {
                return Err(WiceError::ProviderMismatch {
                    expected: ckpt.provider_id.clone(),
                    found: cache.provider_id().to_string(),
                }
                .into());
            }
            Box::new(cache)
        }
        None => Box::new(HashedProvider::from_id(&ckpt.provider_id).ok_or_else(|| {
            CliError::Usage(format!("checkpoint uses provider {}; pass --cache FILE", ckpt.provider_id))
        })?),
    };
    let html = std::fs::read(&args.html).map_err(|e| WiceError::io(&args.html, e))?;
    let page_id = args.html.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let graph = preprocess_unlabeled(&page_id, &html, &config.preprocess_options())?;
    let emb = embed_graph(&graph, provider.as_ref())?;
    let sample = GraphSample::new(&graph, &emb, provider.dim())?;
    let pred = predict(&ckpt.params, &sample)?;
    let chosen: Vec<(usize, Option<f64>)> = match &pred.weights {
        Some(w) => {
            let rule = match (args.top_k, args.min_weight) {
                (Some(k), _) => ContextRule::TopK(k),
                (None, Some(t)) => ContextRule::MinWeight(t),
                (None, None) => ContextRule::Argmax,
            };
            extract_context_nodes(w, rule)?.into_iter().map(|i| (i, Some(w.values[i]))).collect()
        }
        None => {
            let i = baseline_blind(&pred.z_hat, &sample)?;
            vec![(i, pred.attention.as_ref().map(|a| a[i]))]
        }
    };
    let mut stdout = String::new();
    let mut rows = Vec::new();
    for (node, weight) in chosen {
        let row = json!({ "node_id": node, "weight": weight, "text": graph.nodes[node].text });
        let _ = writeln!(stdout, "{row}");
        rows.push(row);
    }
    Ok(StageOutput { stdout, report: json!({ "page_id": page_id, "context": rows }) })
}
