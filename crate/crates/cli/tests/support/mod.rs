//! Helpers for driving the `forge` binary from tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn forge() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_forge"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    forge()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn forge")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// Runs a subcommand that must succeed and returns its stdout JSON.
pub fn run_json(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert_eq!(
        code(&out),
        0,
        "forge {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

pub fn core_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn corpus_manifest() -> String {
    core_fixtures()
        .join("corpus/manifest.json")
        .display()
        .to_string()
}

/// Writes one `{"id","text"}` line per reference, echoing its documentation.
pub fn write_echo_outputs(refs: &Path, out: &Path) {
    let mut body = String::new();
    for line in fs::read_to_string(refs).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        body.push_str(
            &serde_json::json!({ "id": v["id"], "text": v["documentation"] }).to_string(),
        );
        body.push('\n');
    }
    fs::write(out, body).unwrap();
}

/// ingest → extract → filter → build → prompts → eval with echo outputs.
/// Returns the exit code of every step.
pub fn run_e2e(dir: &Path) -> Vec<(&'static str, i32)> {
    let manifest = corpus_manifest();
    let mut codes = Vec::new();
    let mut step = |name: &'static str, args: &[&str]| {
        let out = run(dir, args);
        if code(&out) != 0 {
            eprintln!("{name}: {}", String::from_utf8_lossy(&out.stderr));
        }
        codes.push((name, code(&out)));
    };
    step(
        "ingest",
        &[
            "ingest",
            "--manifest",
            &manifest,
            "--out",
            "work",
            "--exclude",
            "src/broken/**",
        ],
    );
    step(
        "extract",
        &[
            "extract",
            "--inventory",
            "work/inventory.jsonl",
            "--out",
            "work/records.jsonl",
        ],
    );
    step(
        "filter",
        &[
            "filter",
            "--in",
            "work/records.jsonl",
            "--out",
            "work/kept.jsonl",
            "--report",
            "work/filter_report.json",
        ],
    );
    step(
        "build",
        &[
            "build",
            "--in",
            "work/kept.jsonl",
            "--ratios",
            "0.7687,0.0387,0.1926",
            "--seed",
            "7",
            "--out",
            "dataset",
        ],
    );
    step(
        "prompts",
        &[
            "prompts",
            "--dataset",
            "dataset",
            "--split",
            "test",
            "--mode",
            "few",
            "--out",
            "prompts.jsonl",
        ],
    );
    write_echo_outputs(&dir.join("dataset/test.jsonl"), &dir.join("echo.jsonl"));
    step(
        "eval",
        &[
            "eval",
            "--prompts",
            "prompts.jsonl",
            "--refs",
            "dataset/test.jsonl",
            "--adapter",
            "file:echo.jsonl",
            "--run-label",
            "echo-model:few",
            "--out",
            "runs",
        ],
    );
    step(
        "score",
        &[
            "score",
            "--refs",
            "dataset/test.jsonl",
            "--cands",
            "echo.jsonl",
            "--out",
            "score.json",
        ],
    );
    codes
}

/// Every file under `root`, with wall-clock fields removed from run records.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path
                .strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .into_owned();
            let mut bytes = fs::read(&path).unwrap();
            if rel.starts_with("runs") {
                let mut v: Value = serde_json::from_slice(&bytes).unwrap();
                let obj = v.as_object_mut().unwrap();
                obj.remove("started_at");
                obj.remove("finished_at");
                bytes = serde_json::to_vec_pretty(&v).unwrap();
            }
            out.insert(rel, bytes);
        }
    }
    out
}
