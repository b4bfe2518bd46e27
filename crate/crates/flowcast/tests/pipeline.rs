//! End-to-end CLI pipeline: one config file drives generate → train →
//! transfer → eval → sweep with no manual edits in between.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

fn flowcast_bin() -> &'static str {
    env!("CARGO_BIN_EXE_flowcast")
}

fn tiny_config_json(out_dir: &Path) -> String {
    serde_json::json!({
        "schema": "experiment/1",
        "dataset": {
            "template": {
                "topology": {
                    "type": "random",
                    "nodes": {"min": 5, "max": 6},
                    "capacity_bps": {"min": 5e6, "max": 2e7},
                    "prop_delay_s": {"min": 1e-5, "max": 2e-4},
                    "extra_link_prob": 0.25,
                    "buffer_pkts": 1000
                },
                "flow_count": {"min": 2, "max": 3},
                "traffic": [
                    {"type": "poisson", "rate_pps": {"min": 300.0, "max": 1200.0}}
                ],
                "packet_size": {"type": "fixed", "bytes": 1000.0},
                "duration_s": {"min": 0.4, "max": 0.6},
                "utilization_cap": 0.7,
                "fidelity": {"mode": "ideal"}
            },
            "window_length_s": 0.1,
            "simulated": {
                "count": 8,
                "seed": 1,
                "split": {"seed": 11, "fractions": [0.75, 0.25, 0.0]}
            },
            "real": {
                "count": 8,
                "seed": 2,
                "split": {"seed": 12, "counts": [4, 2, 2]}
            }
        },
        "model": {
            "embedding_dim": 4,
            "mpa_iterations": 2,
            "window_length_s": 0.1,
            "encoder_hidden": 4,
            "readout_hidden": 4,
            "inter_window_memory": true
        },
        "train": {"learning_rate": 3e-3, "max_epochs": 3, "patience": 3, "seed": 3},
        "transfer": {
            "method": {"type": "manual", "policy": {"encoding": "freeze", "mpa": "fine_tune", "readout": "retrain"}},
            "learning_rate": null,
            "max_epochs": 3,
            "patience": 3,
            "seed": 4
        },
        "sweep": {"counts": [2, 3], "seeds": [1, 2], "policy": "FTR"},
        "output_dir": out_dir
    })
    .to_string()
}

struct Workspace {
    _dir: tempfile::TempDir,
    config: PathBuf,
    out: PathBuf,
}

fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("experiment.json");
    std::fs::write(&config, tiny_config_json(&out)).unwrap();
    Workspace { _dir: dir, config, out }
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(flowcast_bin())
        .args(args)
        .env_remove("FLOWCAST_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn full_pipeline_runs_from_one_config() {
    let ws = workspace();
    let cfg = ws.config.to_str().unwrap();

    run_ok(&["generate", "--config", cfg]);
    for source in ["simulated", "real"] {
        assert!(ws.out.join("scenarios").join(source).join("0000.json").exists());
        assert!(ws.out.join("datasets").join(source).join("0000.ndjson").exists());
        assert!(ws.out.join("partitions").join(format!("{source}.json")).exists());
    }

    run_ok(&["train", "--config", cfg]);
    let donor = ws.out.join("checkpoints").join("donor.json");
    assert!(donor.exists());
    assert!(ws.out.join("history").join("donor.csv").exists());

    run_ok(&["transfer", "--config", cfg, "--method", "manual:FTR"]);
    assert!(ws.out.join("checkpoints").join("transfer_manual_FTR.json").exists());

    run_ok(&[
        "eval",
        "--config",
        cfg,
        "--checkpoint",
        donor.to_str().unwrap(),
        "--dataset",
        "real",
        "--split",
        "evaluation",
        "--out",
        "donor_eval",
    ]);
    let report = ws.out.join("reports").join("donor_eval.csv");
    assert!(report.exists());
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("metric,value\nmape_pct,"), "got: {text}");
    assert!(ws.out.join("reports").join("donor_eval.ndjson").exists());
    assert!(ws.out.join("reports").join("donor_eval_pdf.csv").exists());

    run_ok(&["sweep", "--config", cfg, "--counts", "2,3", "--seeds", "1,2"]);
    let curve = std::fs::read_to_string(ws.out.join("sweep").join("efficiency.csv")).unwrap();
    assert!(curve.lines().count() == 3, "sweep csv: {curve}");

    // every stage appended a manifest record
    let manifest = std::fs::read_to_string(ws.out.join("manifest.ndjson")).unwrap();
    let commands: Vec<String> = manifest
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["command"].as_str().unwrap().to_string()
        })
        .collect();
    assert_eq!(commands.len(), 5, "manifest: {commands:?}");
    assert!(commands[0].starts_with("generate"));
    assert!(commands[4].starts_with("sweep"));
}

#[test]
fn generate_refuses_to_overwrite_without_force() {
    let ws = workspace();
    let cfg = ws.config.to_str().unwrap();
    run_ok(&["generate", "--config", cfg]);
    let second = run(&["generate", "--config", cfg]);
    assert_eq!(second.status.code(), Some(2), "expected config-error exit");
    let stderr = String::from_utf8_lossy(&second.stderr);
    assert!(stderr.contains("--force"), "stderr: {stderr}");
    run_ok(&["generate", "--config", cfg, "--force"]);
}

#[test]
fn generate_is_byte_identical_across_reruns() {
    let ws = workspace();
    let cfg = ws.config.to_str().unwrap();
    run_ok(&["generate", "--config", cfg]);
    let hash_tree = |root: &Path| -> BTreeMap<String, String> {
        let mut hashes = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let rel = path.strip_prefix(root).unwrap().display().to_string();
                    if rel != "manifest.ndjson" {
                        hashes.insert(rel, flowcast::cli::content_hash(&std::fs::read(&path).unwrap()));
                    }
                }
            }
        }
        hashes
    };
    let first = hash_tree(&ws.out);
    run_ok(&["generate", "--config", cfg, "--force"]);
    let second = hash_tree(&ws.out);
    assert_eq!(first, second, "regenerated outputs must be byte-identical");
}

#[test]
fn invalid_policy_code_lists_the_valid_ones() {
    let ws = workspace();
    let cfg = ws.config.to_str().unwrap();
    let out = run(&["transfer", "--config", cfg, "--method", "manual:FRF"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for code in ["FFT", "FFR", "FTT", "FTR", "FRR", "TTT", "TTR", "TRR"] {
        assert!(stderr.contains(code), "stderr missing {code}: {stderr}");
    }
}

#[test]
fn transfer_without_donor_checkpoint_is_a_data_error() {
    let ws = workspace();
    let cfg = ws.config.to_str().unwrap();
    run_ok(&["generate", "--config", cfg]);
    let out = run(&["transfer", "--config", cfg]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("donor checkpoint"), "stderr: {stderr}");
}

#[test]
fn unknown_config_key_is_rejected_before_any_work() {
    let ws = workspace();
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&ws.config).unwrap()).unwrap();
    value["train"]["momentum"] = serde_json::json!(0.9);
    std::fs::write(&ws.config, value.to_string()).unwrap();
    let out = run(&["generate", "--config", ws.config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown field"), "stderr: {stderr}");
}

#[test]
fn gradcheck_subcommand_passes_quickly() {
    let start = std::time::Instant::now();
    let out = run(&["gradcheck"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS"), "stdout: {stdout}");
    assert!(!stdout.contains("FAIL"), "stdout: {stdout}");
    assert!(start.elapsed().as_secs() < 60, "took {:?}", start.elapsed());
}
