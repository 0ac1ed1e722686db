use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn wice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wice")).arg("--quiet").args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = wice(args);
    assert!(
        out.status.success(),
        "wice {args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], code: i32) -> String {
    let out = wice(args);
    assert_eq!(out.status.code(), Some(code), "wice {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stderr).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

const ARTIFACTS: [&str; 6] = ["graphs.jsonl", "emb.cache", "model.ckpt", "metrics.jsonl", "model.ckpt.split.json", "results.jsonl"];

/// synth → preprocess → embed → train → evaluate in `dir`.
fn pipeline(dir: &Path, pages: &str) -> String {
    ok(&["synth", "--pages", pages, "--sites", "10", "--seed", "3", "--out", &p(dir, "corpus")]);
    ok(&["preprocess", "--corpus", &p(dir, "corpus"), "--out", &p(dir, "graphs.jsonl")]);
    ok(&["embed", "--graphs", &p(dir, "graphs.jsonl"), "--provider", "hashed", "--dim", "64", "--seed", "3", "--out", &p(dir, "emb.cache")]);
    ok(&[
        "train", "--graphs", &p(dir, "graphs.jsonl"), "--embeddings", &p(dir, "emb.cache"), "--split", "by_page",
        "--seed", "3", "--arch", "wgcn", "--out", &p(dir, "model.ckpt"), "--metrics", &p(dir, "metrics.jsonl"),
        "--epochs", "15",
    ]);
    ok(&[
        "evaluate", "--graphs", &p(dir, "graphs.jsonl"), "--embeddings", &p(dir, "emb.cache"), "--ckpt",
        &p(dir, "model.ckpt"), "--methods", "wgcn,oracle,text_after_image,random,title,distance,blind",
        "--split-file", &p(dir, "model.ckpt.split.json"), "--out", &p(dir, "results.jsonl"),
    ])
}

fn digest(path: PathBuf) -> String {
    hex::encode(Sha256::digest(fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))))
}

#[test]
fn full_pipeline_on_200_pages_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let table = pipeline(a.path(), "200");
    assert!(table.contains("wgcn") && table.contains("oracle violations 0"), "{table}");
    pipeline(b.path(), "200");
    for name in ARTIFACTS {
        assert_eq!(digest(a.path().join(name)), digest(b.path().join(name)), "{name}");
        let meta = format!("{name}.meta.json");
        assert_eq!(digest(a.path().join(&meta)), digest(b.path().join(&meta)), "{meta}");
    }
    let results = fs::read_to_string(a.path().join("results.jsonl")).unwrap();
    // 30% of 200 pages, seven methods.
    assert_eq!(results.lines().count(), 60 * 7);
    let metrics = fs::read_to_string(a.path().join("metrics.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(metrics.lines().next().unwrap()).unwrap();
    assert_eq!(first["epoch"], 1);
    assert!(first["split"].is_string() && first["mean_loss"].is_number());

    let extracted = ok(&["extract", "--ckpt", &p(a.path(), "model.ckpt"), "--html", &p(a.path(), "corpus/p000007.html")]);
    let row: serde_json::Value = serde_json::from_str(extracted.trim()).unwrap();
    assert!(row["node_id"].is_u64() && row["weight"].is_f64() && row["text"].is_string(), "{row}");
    let top = ok(&["extract", "--ckpt", &p(a.path(), "model.ckpt"), "--html", &p(a.path(), "corpus/p000007.html"), "--top-k", "3"]);
    assert_eq!(top.lines().count(), 3);
    assert_eq!(top.lines().next().unwrap(), extracted.trim());
}

#[test]
fn evaluate_before_train_names_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--pages", "20", "--sites", "2", "--out", &p(d, "corpus")]);
    ok(&["preprocess", "--corpus", &p(d, "corpus"), "--out", &p(d, "graphs.jsonl")]);
    ok(&["embed", "--graphs", &p(d, "graphs.jsonl"), "--dim", "32", "--out", &p(d, "emb.cache")]);
    let err = fails(
        &[
            "evaluate", "--graphs", &p(d, "graphs.jsonl"), "--embeddings", &p(d, "emb.cache"), "--ckpt",
            &p(d, "model.ckpt"), "--split-file", &p(d, "split.json"), "--out", &p(d, "results.jsonl"),
        ],
        2,
    );
    assert!(err.contains("missing prerequisite"), "{err}");
    let err = fails(&["embed", "--graphs", &p(d, "nope.jsonl"), "--out", &p(d, "x")], 2);
    assert!(err.contains("missing prerequisite graphs"), "{err}");
    assert!(!d.join("results.jsonl").exists());
}

#[test]
fn missing_model_for_a_method_is_a_missing_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--pages", "20", "--sites", "2", "--out", &p(d, "corpus")]);
    ok(&["preprocess", "--corpus", &p(d, "corpus"), "--out", &p(d, "graphs.jsonl")]);
    ok(&["embed", "--graphs", &p(d, "graphs.jsonl"), "--dim", "32", "--out", &p(d, "emb.cache")]);
    ok(&[
        "train", "--graphs", &p(d, "graphs.jsonl"), "--embeddings", &p(d, "emb.cache"), "--out", &p(d, "m.ckpt"),
        "--metrics", &p(d, "m.jsonl"), "--epochs", "1",
    ]);
    let err = fails(
        &[
            "evaluate", "--graphs", &p(d, "graphs.jsonl"), "--embeddings", &p(d, "emb.cache"), "--ckpt",
            &p(d, "m.ckpt"), "--methods", "wgcn,gat", "--split-file", &p(d, "m.ckpt.split.json"), "--out",
            &p(d, "r.jsonl"),
        ],
        2,
    );
    assert!(err.contains("missing prerequisite gat checkpoint"), "{err}");
}

#[test]
fn artifacts_from_different_runs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--pages", "20", "--sites", "2", "--out", &p(d, "corpus")]);
    ok(&["preprocess", "--corpus", &p(d, "corpus"), "--out", &p(d, "g1.jsonl")]);
    ok(&["preprocess", "--corpus", &p(d, "corpus"), "--min-text-chars", "4", "--out", &p(d, "g2.jsonl")]);
    ok(&["embed", "--graphs", &p(d, "g1.jsonl"), "--dim", "32", "--out", &p(d, "e1.cache")]);
    let err = fails(
        &[
            "train", "--graphs", &p(d, "g2.jsonl"), "--embeddings", &p(d, "e1.cache"), "--out", &p(d, "m.ckpt"),
            "--metrics", &p(d, "m.jsonl"),
        ],
        2,
    );
    assert!(err.contains("embeddings was built from graphs"), "{err}");

    let mut graphs = fs::read(d.join("g1.jsonl")).unwrap();
    graphs.extend_from_slice(b"\n");
    fs::write(d.join("g1.jsonl"), graphs).unwrap();
    let err = fails(&["embed", "--graphs", &p(d, "g1.jsonl"), "--out", &p(d, "e3.cache")], 2);
    assert!(err.contains("do not match the digest"), "{err}");
}

#[test]
fn error_rate_limit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--pages", "10", "--sites", "2", "--out", &p(d, "corpus")]);
    for i in 0..3 {
        fs::write(d.join(format!("corpus/p00000{i}.html")), "<html><body><p>no picture here</p></body></html>").unwrap();
    }
    let err = fails(&["preprocess", "--corpus", &p(d, "corpus"), "--max-error-rate", "0.2", "--out", &p(d, "g.jsonl")], 2);
    assert!(err.contains("3 of 10"), "{err}");
    assert!(!d.join("g.jsonl").exists());
    ok(&["preprocess", "--corpus", &p(d, "corpus"), "--max-error-rate", "0.3", "--out", &p(d, "g.jsonl")]);
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(d.join("g.jsonl.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["report"]["rejected"]["NoImage"], 3);
    assert_eq!(meta["report"]["graphs"], 7);
}

#[test]
fn usage_errors_and_help() {
    fails(&["train", "--bogus"], 1);
    fails(&["frobnicate"], 1);
    fails(&["synth", "--out", "x", "--pages", "many"], 1);
    let help = ok(&["train", "--help"]);
    for flag in ["--graphs", "--embeddings", "--split", "--seed", "--arch", "--out", "--metrics", "--resume"] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
    let help = ok(&["--help"]);
    for cmd in ["synth", "preprocess", "embed", "train", "evaluate", "extract"] {
        assert!(help.contains(cmd));
    }
    assert!(help.contains("Exit codes"));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), "seed = 5\ndim = 48\npages = 12\nsites = 3\n").unwrap();
    let cfg = p(d, "run.toml");
    ok(&["--config", &cfg, "synth", "--out", &p(d, "corpus")]);
    assert_eq!(fs::read_to_string(d.join("corpus/manifest.tsv")).unwrap().lines().count(), 12);
    ok(&["--config", &cfg, "preprocess", "--corpus", &p(d, "corpus"), "--out", &p(d, "g.jsonl")]);
    ok(&["--config", &cfg, "embed", "--graphs", &p(d, "g.jsonl"), "--out", &p(d, "a.cache")]);
    ok(&["--config", &cfg, "embed", "--graphs", &p(d, "g.jsonl"), "--dim", "24", "--out", &p(d, "b.cache")]);
    let header = |f: &str| fs::read_to_string(d.join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("a.cache"), "dim=48 provider=hashed-d48-s5");
    assert_eq!(header("b.cache"), "dim=24 provider=hashed-d24-s5");
    fs::write(d.join("bad.toml"), "dimension = 3\n").unwrap();
    fails(&["--config", &p(d, "bad.toml"), "synth", "--out", &p(d, "c2")], 1);
}

#[test]
fn resume_continues_training() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--pages", "30", "--sites", "3", "--out", &p(d, "corpus")]);
    ok(&["preprocess", "--corpus", &p(d, "corpus"), "--out", &p(d, "g.jsonl")]);
    ok(&["embed", "--graphs", &p(d, "g.jsonl"), "--dim", "32", "--out", &p(d, "e.cache")]);
    let train = |out: &str, epochs: &str, resume: Option<&str>| {
        let mut args = vec![
            "train".to_string(), "--graphs".into(), p(d, "g.jsonl"), "--embeddings".into(), p(d, "e.cache"),
            "--out".into(), p(d, out), "--metrics".into(), p(d, &format!("{out}.metrics")), "--epochs".into(),
            epochs.into(), "--patience".into(), "0".into(),
        ];
        if let Some(r) = resume {
            args.push("--resume".into());
            args.push(p(d, r));
        }
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>())
    };
    train("a.ckpt", "2", None);
    let resumed = train("b.ckpt", "4", Some("a.ckpt"));
    assert!(resumed.contains("for 4 epochs"), "{resumed}");
}
