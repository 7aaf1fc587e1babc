use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use psgbench::checkpoint;

fn psgbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psgbench"))
        .args(args)
        .env_remove("PSGBENCH_DATA")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = psgbench(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Relative path and contents of every file under `dir`, sorted.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, subjects: &str) {
    ok(&["generate", "--out", s(dir), "--subjects", subjects, "--duration-s", "300", "--seed", "7", "--force"]);
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn generate_is_byte_identical_and_guarded() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("cohort");
    generate(&data, "8");
    let first = snapshot(&data);
    generate(&data, "8");
    assert_eq!(first, snapshot(&data));
    assert!(first.iter().any(|(p, _)| p == Path::new("manifest.jsonl")));
    assert!(first.iter().any(|(p, _)| p == Path::new("config.json")));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(data.join("summary.json")).unwrap()).unwrap();
    let parts: u64 = ["train", "validation", "test"].iter().map(|k| summary[k].as_u64().unwrap()).sum();
    assert_eq!(parts, summary["records"].as_u64().unwrap());
    assert_eq!(parts, 8);

    let again = psgbench(&["generate", "--out", s(&data), "--subjects", "8", "--duration-s", "300"]);
    assert_eq!(again.status.code(), Some(1));
    let zero = psgbench(&["generate", "--out", s(&tmp.path().join("z")), "--subjects", "0"]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn data_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_psgbench"))
        .args(["generate", "--subjects", "3", "--duration-s", "300"])
        .env("PSGBENCH_DATA", tmp.path().join("env"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("env/manifest.jsonl").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let bad = psgbench(&["pretrain", "--data", "x", "--out", "y", "--objective", "mae"]);
    assert_eq!(bad.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert!(msg.contains("cl_loo") && msg.contains("mae_time_all"), "{msg}");
    assert_eq!(psgbench(&["protocol", "sweep"]).status.code(), Some(2));
    assert_eq!(psgbench(&["finetune-eval", "--data", "x", "--out", "y", "--task", "staging"]).status.code(), Some(2));
    assert_eq!(psgbench(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(psgbench(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_cohort_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = psgbench(&[
        "pretrain", "--data", s(&tmp.path().join("none")), "--out", s(&tmp.path().join("o")), "--objective", "cl_loo",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pretrain_then_finetune_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("cohort");
    generate(&data, "6");
    let run = tmp.path().join("pre");
    let pre = |objective: &str| {
        ok(&[
            "pretrain", "--data", s(&data), "--out", s(&run), "--objective", objective, "--epochs", "1", "--seed", "3",
            "--force",
        ])
    };
    pre("mae_freq_masked");
    let loss = csv_rows(&run.join("loss.csv"));
    assert!(loss.iter().all(|r| r[1] == "1"));
    assert!(loss.iter().any(|r| r[3] == "train"));
    let first = snapshot(&run);
    pre("mae_freq_masked");
    assert_eq!(first, snapshot(&run));

    pre("cl_loo");
    let (header, _) = checkpoint::read(&run.join("checkpoint.bin")).unwrap();
    assert_eq!(header.objective.unwrap().name(), "cl_loo");
    assert_eq!(header.seed, 3);

    let eval = tmp.path().join("ft");
    let ft = || {
        ok(&[
            "finetune-eval", "--data", s(&data), "--out", s(&eval), "--task", "apnea", "--checkpoint",
            s(&run.join("checkpoint.bin")), "--max-epochs", "2", "--n-boot", "100", "--force",
        ])
    };
    ft();
    let rows = csv_rows(&eval.join("metrics.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0][1].as_str(), rows[0][2].as_str()), ("cl_loo", "auroc"));
    let first = snapshot(&eval);
    ft();
    assert_eq!(first, snapshot(&eval));

    // A head file is not a backbone.
    let wrong = psgbench(&[
        "finetune-eval", "--data", s(&data), "--out", s(&tmp.path().join("x")), "--task", "age", "--checkpoint",
        s(&eval.join("head.bin")),
    ]);
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn baseline_reports_have_expected_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("cohort");
    generate(&data, "10");
    let run = |task: &str| {
        let out = tmp.path().join(task);
        ok(&[
            "finetune-eval", "--data", s(&data), "--out", s(&out), "--task", task, "--method", "baseline_freq",
            "--max-epochs", "1", "--n-boot", "100",
        ]);
        out
    };
    let staging = run("staging");
    let rows = csv_rows(&staging.join("metrics.csv"));
    let metrics: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(metrics, ["auroc_macro", "auroc_Wake", "auroc_N1", "auroc_N2", "auroc_N3", "auroc_REM"]);
    let preds = csv_rows(&staging.join("predictions.csv"));
    assert_eq!(preds.len(), 60 * rows[0][6].parse::<usize>().unwrap());
    assert_eq!(preds[0].len(), 3 + 5);

    let survival = run("survival");
    let rows = csv_rows(&survival.join("metrics.csv"));
    assert_eq!(rows.len(), 14);
    assert_eq!(rows[13][2], "c_index_mean");
    let json: Vec<serde_json::Value> =
        serde_json::from_slice(&fs::read(survival.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(json.len(), 14);
    assert_eq!(csv_rows(&survival.join("predictions.csv"))[0].len(), 2 + 13);
}

#[test]
fn fewshot_protocol_writes_long_format() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("cohort");
    generate(&data, "14");
    let out = tmp.path().join("fs");
    ok(&[
        "protocol", "fewshot", "--data", s(&data), "--out", s(&out), "--task", "age", "--method", "baseline_time",
        "--method", "baseline_freq", "--sizes", "1,2", "--replicates", "2", "--max-epochs", "1", "--n-boot", "100",
    ]);
    let rows = csv_rows(&out.join("results.csv"));
    assert_eq!(rows.len(), 2 * 2 * 2);
    assert_eq!(csv_rows(&out.join("summary.csv")).len(), 4);
    assert!(rows.iter().all(|r| r[7] == "fewshot"));
}
