//! Atomic artifact writes and `.meta.json` provenance sidecars.
//!
//! Every artifact `X` gets `X.meta.json` holding the resolved config, a
//! config hash, the hashes of the artifacts it was built from and a
//! SHA-256 digest of its bytes. The config hash of an artifact covers the
//! stage name, the config and its inputs' hashes, so two artifacts agree on
//! an input exactly when they were built from the same upstream run.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use wice_core::error::WiceError;

pub const META_SUFFIX: &str = ".meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub artifact: String,
    pub stage: String,
    pub config_hash: String,
    /// Input artifact name to its config hash.
    pub inputs: BTreeMap<String, String>,
    pub content_sha256: String,
    pub config: RunConfig,
    /// Stage-specific counts and summaries.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub report: serde_json::Value,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(META_SUFFIX);
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash identifying one stage run.
pub fn stage_hash(stage: &str, config: &RunConfig, inputs: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update([0]);
    h.update(config.hash().as_bytes());
    for (name, hash) in inputs {
        h.update([0]);
        h.update(name.as_bytes());
        h.update([b'=']);
        h.update(hash.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Write through a temporary file in the same directory and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| WiceError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| WiceError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| WiceError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| WiceError::io(path, e))?;
    tmp.persist(path).map_err(|e| WiceError::io(path, e.error))?;
    Ok(())
}

/// Metadata for an artifact about to be written.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub artifact: String,
    pub stage: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(artifact: &str, stage: &str, config: &RunConfig, inputs: &[&ArtifactMeta]) -> Self {
        let inputs = inputs.iter().map(|m| (m.artifact.clone(), m.config_hash.clone())).collect();
        Self::with_inputs(artifact, stage, config, inputs)
    }

    pub fn with_inputs(artifact: &str, stage: &str, config: &RunConfig, inputs: BTreeMap<String, String>) -> Self {
        Provenance {
            artifact: artifact.to_string(),
            stage: stage.to_string(),
            config_hash: stage_hash(stage, config, &inputs),
            inputs,
            config: config.clone(),
        }
    }

    /// Same stage run, another output.
    pub fn sibling(&self, artifact: &str) -> Self {
        Provenance { artifact: artifact.to_string(), ..self.clone() }
    }

    /// Write `bytes` to `path` and the sidecar next to it, both atomically.
    pub fn write(&self, path: &Path, bytes: &[u8], report: serde_json::Value) -> CliResult<ArtifactMeta> {
        let meta = ArtifactMeta {
            artifact: self.artifact.clone(),
            stage: self.stage.clone(),
            config_hash: self.config_hash.clone(),
            inputs: self.inputs.clone(),
            content_sha256: sha256_hex(bytes),
            config: self.config.clone(),
            report,
        };
        write_atomic(path, bytes)?;
        let mut json = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
        json.push(b'\n');
        write_atomic(&meta_path(path), &json)?;
        Ok(meta)
    }
}

/// Fail with `MissingPrerequisite` when `path` does not exist.
pub fn require(artifact: &str, path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::missing(artifact, path))
    }
}

/// Read an artifact and its sidecar, checking the recorded digest.
pub fn read_artifact(artifact: &str, path: &Path) -> CliResult<(Vec<u8>, ArtifactMeta)> {
    require(artifact, path)?;
    let mpath = meta_path(path);
    require(&format!("{artifact} metadata"), &mpath)?;
    let bytes = fs::read(path).map_err(|e| WiceError::io(path, e))?;
    let meta_text = fs::read(&mpath).map_err(|e| WiceError::io(&mpath, e))?;
    let meta: ArtifactMeta = serde_json::from_slice(&meta_text)
        .map_err(|e| CliError::Metadata { path: mpath.clone(), message: e.to_string() })?;
    if meta.artifact != artifact {
        return Err(CliError::Metadata {
            path: mpath,
            message: format!("describes a {} artifact, expected {artifact}", meta.artifact),
        });
    }
    if meta.content_sha256 != sha256_hex(&bytes) {
        return Err(CliError::DigestMismatch { path: path.to_path_buf() });
    }
    Ok((bytes, meta))
}

/// Check that `meta` was built from `input`.
pub fn check_lineage(meta: &ArtifactMeta, input: &ArtifactMeta) -> CliResult<()> {
    match meta.inputs.get(&input.artifact) {
        Some(recorded) if *recorded == input.config_hash => Ok(()),
        Some(recorded) => Err(CliError::LineageMismatch {
            artifact: meta.artifact.clone(),
            input: input.artifact.clone(),
            recorded: recorded.clone(),
            actual: input.config_hash.clone(),
        }),
        None => Err(CliError::Metadata {
            path: PathBuf::from(&meta.artifact),
            message: format!("records no {} input", input.artifact),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/graphs.jsonl");
        let cfg = RunConfig::default();
        let p = Provenance::new("graphs", "preprocess", &cfg, &[]);
        let written = p.write(&path, b"{}\n", serde_json::json!({"pages": 1})).unwrap();
        let (bytes, meta) = read_artifact("graphs", &path).unwrap();
        assert_eq!(bytes, b"{}\n");
        assert_eq!(meta, written);
        assert!(matches!(read_artifact("embeddings", &path), Err(CliError::Metadata { .. })));
        fs::write(&path, b"tampered").unwrap();
        assert!(matches!(read_artifact("graphs", &path), Err(CliError::DigestMismatch { .. })));
        assert_eq!(fs::read_dir(dir.path().join("sub")).unwrap().count(), 2);
    }

    #[test]
    fn missing_files_name_the_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        match read_artifact("checkpoint", &path) {
            Err(CliError::MissingPrerequisite { artifact, .. }) => assert_eq!(artifact, "checkpoint"),
            other => panic!("{other:?}"),
        }
        fs::write(&path, b"x").unwrap();
        match read_artifact("checkpoint", &path) {
            Err(CliError::MissingPrerequisite { artifact, .. }) => assert_eq!(artifact, "checkpoint metadata"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lineage() {
        let cfg = RunConfig::default();
        let graphs = Provenance::new("graphs", "preprocess", &cfg, &[]);
        let g = ArtifactMeta {
            artifact: "graphs".into(),
            stage: "preprocess".into(),
            config_hash: graphs.config_hash.clone(),
            inputs: BTreeMap::new(),
            content_sha256: String::new(),
            config: cfg.clone(),
            report: serde_json::Value::Null,
        };
        let emb = Provenance::new("embeddings", "embed", &cfg, &[&g]);
        let e = ArtifactMeta { artifact: "embeddings".into(), inputs: emb.inputs.clone(), ..g.clone() };
        check_lineage(&e, &g).unwrap();
        let mut other_cfg = cfg.clone();
        other_cfg.min_text_chars = 5;
        let g2 = ArtifactMeta { config_hash: Provenance::new("graphs", "preprocess", &other_cfg, &[]).config_hash, ..g };
        assert!(matches!(check_lineage(&e, &g2), Err(CliError::LineageMismatch { .. })));
    }
}
