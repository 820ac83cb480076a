#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gradhorizon"))
}

pub fn corpus_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/corpus.c")
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("failed to launch binary")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Trains at default settings for `batches` batches and returns the log
/// and model paths.
pub fn train_fixture(dir: &Path, batches: usize, extra: &[&str]) -> (PathBuf, PathBuf) {
    let log = dir.join("log.json");
    let model = dir.join("model.json");
    let corpus = corpus_path();
    let n = batches.to_string();
    let mut args = vec![
        "train",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        log.to_str().unwrap(),
        "--model-out",
        model.to_str().unwrap(),
        "--max-batches",
        &n,
    ];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "train failed: {}", stderr(&o));
    (log, model)
}
