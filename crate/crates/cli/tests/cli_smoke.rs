//! Exit-code and stage-isolation behavior of the ipforge binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn ipforge() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ipforge"))
}

/// Copy of the example config with the output directory pointed at `out`.
fn config_with_output(out: &Path) -> PathBuf {
    let body = fs::read_to_string(repo_path("configs/pipeline.example.json")).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&body).unwrap();
    for (key, value) in [
        ("documents", serde_json::json!(repo_path("fixtures/documents.jsonl"))),
        ("patents", serde_json::json!([repo_path("fixtures/patents_en.jsonl"), repo_path("fixtures/patents_zh.jsonl")])),
        ("wrappers", serde_json::json!([repo_path("fixtures/wrappers_en.jsonl"), repo_path("fixtures/wrappers_zh.jsonl")])),
        ("eval_instances", serde_json::json!(repo_path("fixtures/eval_instances.jsonl"))),
        ("model_outputs", serde_json::json!(repo_path("fixtures/model_outputs.jsonl"))),
        ("output_dir", serde_json::json!(out)),
    ] {
        cfg["paths"][key] = value;
    }
    let path = out.join("config.json");
    fs::create_dir_all(out).unwrap();
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"seed\": 1}").unwrap();
    let status = ipforge().args(["preprocess", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(2));

    // a config referencing a missing input path also fails validation
    let config = config_with_output(dir.path());
    let mut cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&config).unwrap()).unwrap();
    cfg["paths"]["documents"] = serde_json::json!("/nonexistent/nowhere.jsonl");
    fs::write(&config, serde_json::to_string(&cfg).unwrap()).unwrap();
    let output = ipforge().args(["preprocess", "--config"]).arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("paths.documents"), "{stderr}");
}

#[test]
fn missing_upstream_artifact_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_with_output(dir.path());
    // schedule requires tokenize output, which does not exist yet
    let output = ipforge().args(["schedule", "--config"]).arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("tokenize"), "{stderr}");
}

#[test]
fn stages_rerun_reproducibly_from_upstream_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_with_output(dir.path());
    for sub in ["preprocess", "synthesize", "tokenize", "schedule"] {
        let status = ipforge().args([sub, "--config"]).arg(&config).status().unwrap();
        assert!(status.success(), "{sub} failed");
    }
    let first = fs::read(dir.path().join("batches_stage1.bin")).unwrap();
    let first_vocab = fs::read(dir.path().join("vocab_tokens.txt")).unwrap();

    // delete the tokenize and schedule outputs, re-run only those stages
    for name in [
        "vocab_tokens.txt",
        "vocab_merges.txt",
        "tokenized.jsonl",
        "compression.json",
        "batches_stage1.bin",
        "batches_stage1.index.json",
    ] {
        fs::remove_file(dir.path().join(name)).unwrap();
    }
    for sub in ["tokenize", "schedule"] {
        let status = ipforge().args([sub, "--config"]).arg(&config).status().unwrap();
        assert!(status.success(), "{sub} rerun failed");
    }
    assert_eq!(fs::read(dir.path().join("batches_stage1.bin")).unwrap(), first);
    assert_eq!(fs::read(dir.path().join("vocab_tokens.txt")).unwrap(), first_vocab);
}

#[test]
fn cost_preset_flag_limits_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_with_output(dir.path());
    let status = ipforge()
        .args(["cost", "--preset", "smoe47B", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("cost_smoe47B_memory.csv").exists());
    assert!(!dir.path().join("cost_dense70B_memory.csv").exists());
    let csv = fs::read_to_string(dir.path().join("cost_smoe47B_memory.csv")).unwrap();
    assert!(csv.starts_with("seq_len,bytes\n"));
}

#[test]
fn evaluate_task_flag_restricts_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_with_output(dir.path());
    let status = ipforge()
        .args(["evaluate", "--task", "translation", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    let metrics = fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
    assert!(metrics.contains("bleu"));
    assert!(!metrics.contains("macro_f1"));

    let status = ipforge()
        .args(["evaluate", "--task", "nonsense", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn output_dir_env_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_with_output(dir.path());
    let other = tempfile::tempdir().unwrap();
    let status = ipforge()
        .args(["cost", "--config"])
        .arg(&config)
        .env("IPFORGE_OUTPUT_DIR", other.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(other.path().join("cost_smoe47B_memory.csv").exists());
    assert!(!dir.path().join("cost_smoe47B_memory.csv").exists());
}

#[test]
fn pairwise_judging_runs_when_baseline_outputs_exist() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_with_output(dir.path());

    // qa instances plus two output files; the position-biased mock judge
    // must tie every pair after swap averaging
    let instances = dir.path().join("qa_instances.jsonl");
    let model_out = dir.path().join("model.jsonl");
    let baseline_out = dir.path().join("baseline.jsonl");
    let mut inst_lines = String::new();
    let mut model_lines = String::new();
    let mut base_lines = String::new();
    for i in 0..5 {
        inst_lines.push_str(&format!(
            "{{\"task\":\"qa\",\"prompt\":\"question {i}\",\"reference\":\"ref\",\"language\":\"en\"}}\n"
        ));
        model_lines.push_str(&format!("{{\"output\":\"candidate answer {i} with detail\"}}\n"));
        base_lines.push_str(&format!("{{\"output\":\"short {i}\"}}\n"));
    }
    fs::write(&instances, inst_lines).unwrap();
    fs::write(&model_out, model_lines).unwrap();
    fs::write(&baseline_out, base_lines).unwrap();

    let mut cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&config).unwrap()).unwrap();
    cfg["paths"]["eval_instances"] = serde_json::json!(instances);
    cfg["paths"]["model_outputs"] = serde_json::json!(model_out);
    cfg["paths"]["baseline_outputs"] = serde_json::json!(baseline_out);
    cfg["eval"]["judge_endpoint"] = serde_json::json!("mock:position-bias");
    fs::write(&config, serde_json::to_string(&cfg).unwrap()).unwrap();

    let status = ipforge().args(["evaluate", "--config"]).arg(&config).status().unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metric_report.json")).unwrap())
            .unwrap();
    let tallies = report["tallies"].as_array().unwrap();
    assert_eq!(tallies.len(), 1);
    assert_eq!(tallies[0]["ties"], 5);
    assert_eq!(tallies[0]["wins"], 0);
    assert_eq!(tallies[0]["loses"], 0);
    assert!(dir.path().join("verdicts.jsonl").exists());
}

#[test]
fn verify_kernels_reports_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_with_output(dir.path());
    let output = ipforge().args(["verify-kernels", "--config"]).arg(&config).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("sft-loss-untied"), "{stdout}");
    assert!(stdout.matches("pass").count() >= 4, "{stdout}");
    let report = fs::read_to_string(dir.path().join("kernel_report.json")).unwrap();
    assert!(report.contains("\"pass\": true"));
}
