//! Command-line surface tests: exit codes, output contracts, stage flow.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nutribullets"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nb_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const SMALL_CONFIG: &str = r#"
[paths]
corpus = "corpus.jsonl"
checkpoints = "checkpoints"

[embed]
dim = 24

[extract]
hidden = 16
epochs = 3

[knowledge]
epochs = 8

[train]
episodes = 60
seed = 5

[fuse]
blm_epochs = 8
min_sentences = 40
"#;

#[test]
fn unknown_flag_exits_2() {
    let out = bin().arg("--definitely-not-a-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.to_lowercase().contains("usage"), "stderr: {err}");
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_and_stats_round_trip() {
    let dir = workdir("stats");
    let out = run_in(&dir, &["synth", "--seed", "7", "--foods", "10", "--tuples", "3", "--out", "c.jsonl"]);
    assert!(out.status.success());
    let table = run_in(&dir, &["stats", "--data", "c.jsonl", "--name", "synth"]);
    assert!(table.status.success());
    let text = String::from_utf8_lossy(&table.stdout);
    assert!(text.contains("train"), "stats table: {text}");
    let json = run_in(&dir, &["stats", "--data", "c.jsonl", "--json"]);
    assert!(json.status.success());
    let parsed: serde_json::Value =
        serde_json::from_slice(&json.stdout).expect("stats --json emits JSON");
    assert_eq!(parsed["total_instances"], 10);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn stats_on_missing_file_exits_1() {
    let dir = workdir("missing");
    let out = run_in(&dir, &["stats", "--data", "nope.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error"), "stderr: {err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn summarize_without_checkpoints_names_the_missing_one() {
    let dir = workdir("nockpt");
    let synth = run_in(&dir, &["synth", "--foods", "10", "--tuples", "3", "--out", "corpus.jsonl"]);
    assert!(synth.status.success());
    std::fs::write(dir.join("config.toml"), SMALL_CONFIG).unwrap();
    let out = run_in(
        &dir,
        &["summarize", "--config", "config.toml", "--out", "out.jsonl"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("extractor.json"),
        "error should name the missing checkpoint: {err}"
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn full_stage_flow_produces_outputs_and_report() {
    let dir = workdir("flow");
    let synth = run_in(&dir, &["synth", "--foods", "40", "--tuples", "3", "--out", "corpus.jsonl"]);
    assert!(synth.status.success());
    std::fs::write(dir.join("config.toml"), SMALL_CONFIG).unwrap();

    for stage in ["train-knowledge", "train-extractor", "train-blm"] {
        let out = run_in(&dir, &[stage, "--config", "config.toml"]);
        assert!(
            out.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        // every train stage reports JSON on stdout
        let parsed: Result<serde_json::Value, _> = serde_json::from_slice(&out.stdout);
        assert!(parsed.is_ok(), "{stage} stdout not JSON");
    }

    // policy training with an ablation prints the effective weights
    let out = run_in(
        &dir,
        &["train-policy", "--config", "config.toml", "--ablate", "rm,rd"],
    );
    assert!(
        out.status.success(),
        "train-policy: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("\"w_m\":0.0") && err.contains("\"w_d\":0.0"),
        "effective weights line should zero w_m and w_d: {err}"
    );
    assert!(err.contains("\"w_e\":1.0"), "w_e untouched: {err}");

    // summarize writes one line per test instance
    let out = run_in(
        &dir,
        &[
            "summarize",
            "--config",
            "config.toml",
            "--split",
            "test",
            "--out",
            "out.jsonl",
            "--trace",
        ],
    );
    assert!(
        out.status.success(),
        "summarize: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let lines: Vec<String> = std::fs::read_to_string(dir.join("out.jsonl"))
        .unwrap()
        .lines()
        .map(|l| l.to_string())
        .collect();
    // synth assigns every 5th food to test
    assert_eq!(lines.len(), 8, "expected 8 test instances");
    for line in &lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("instance").is_some());
        assert!(v.get("output").is_some());
        assert!(v.get("trace").is_some(), "--trace must include traces");
    }

    // evaluate prints the report JSON on stdout
    let out = run_in(
        &dir,
        &[
            "evaluate",
            "--config",
            "config.toml",
            "--gold",
            "corpus.jsonl",
            "--outputs",
            "out.jsonl",
        ],
    );
    assert!(
        out.status.success(),
        "evaluate: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("evaluate stdout is the report JSON");
    for key in ["meteor", "kg_gold", "kg_input", "diversity", "contrastiveness", "per_instance"] {
        assert!(report.get(key).is_some(), "report missing {key}");
    }
    assert_eq!(report["per_instance"].as_array().unwrap().len(), 8);

    // manifest exists, carries the config hash and stage timings
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("checkpoints/run_manifest.json")).unwrap(),
    )
    .unwrap();
    assert!(!manifest["config_hash"].as_str().unwrap().is_empty());
    assert!(manifest["timings_ms"].get("train-policy").is_some());
    assert!(manifest["checkpoints"].get("policy.json").is_some());

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn seed_env_var_overrides_config() {
    let dir = workdir("seedenv");
    let synth = run_in(&dir, &["synth", "--foods", "10", "--tuples", "2", "--out", "corpus.jsonl"]);
    assert!(synth.status.success());
    std::fs::write(dir.join("config.toml"), SMALL_CONFIG).unwrap();
    // a bogus value must fail config loading with exit 1
    let out = bin()
        .args(["train-knowledge", "--config", "config.toml"])
        .current_dir(&dir)
        .env("NUTRIBULLET_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NUTRIBULLET_SEED"));
    std::fs::remove_dir_all(&dir).ok();
}
