#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_foodpair")
}

/// Runs the binary in `dir`; panics with stderr unless it exits 0.
pub fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "foodpair {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).args(args).current_dir(dir).output().expect("spawn foodpair")
}

pub struct Pipeline {
    pub dir: PathBuf,
}

impl Pipeline {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn read(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }
}

/// Full pipeline on the planted synthetic corpus: synth, ingest, score,
/// embed, train, eval (model and cosine baseline).
pub fn run_pipeline(dir: &Path, seed: u64, extra_train: &[&str]) -> Pipeline {
    let s = seed.to_string();
    run_ok(dir, &["synth", "--out", "recipes.jsonl", "--seed", &s]);
    run_ok(dir, &["ingest", "--recipes", "recipes.jsonl", "--out", "counts.tsv"]);
    run_ok(dir, &["score", "--counts", "counts.tsv", "--out", "scores.tsv", "--seed", &s]);
    run_ok(dir, &["embed", "--counts", "counts.tsv", "--dim", "16", "--out", "emb.txt", "--seed", &s]);
    let mut train = vec![
        "train", "--scores", "scores.tsv", "--embeddings", "emb.txt", "--hidden", "16", "--seed", &s,
        "--out-dir", "run", "--max-epochs", "60",
    ];
    train.extend_from_slice(extra_train);
    run_ok(dir, &train);
    run_ok(
        dir,
        &["eval", "--checkpoint", "run/best.json", "--scores", "scores.tsv", "--embeddings", "emb.txt", "--out", "report.json"],
    );
    run_ok(
        dir,
        &["eval", "--baseline", "cosine", "--scores", "scores.tsv", "--embeddings", "emb.txt", "--out", "cosine.json"],
    );
    Pipeline { dir: dir.to_owned() }
}
