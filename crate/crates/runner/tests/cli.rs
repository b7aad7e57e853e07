use std::path::Path;
use std::process::{Command, Output};

use crn_smc_runner::experiment::deterministic_part;

fn crn_smc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crn-smc")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_then_run_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sir.csv");
    let data_s = data.to_str().unwrap();
    ok(&crn_smc(&["generate-data", "--model", "sir", "--observations", "12", "--seed", "3", "--out", data_s]));
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sir.json")).unwrap()).unwrap();
    assert_eq!(side["true_theta"], serde_json::json!([0.6, 0.3]));
    assert_eq!(side["data_seed"], 3);

    let out = dir.path().join("res");
    let run = crn_smc(&[
        "run",
        "--model",
        "sir",
        "--proposal",
        "rw",
        "--n-samples",
        "8",
        "--n-particles",
        "16",
        "--iterations",
        "3",
        "--mc-runs",
        "2",
        "--workers",
        "2",
        "--data",
        data_s,
        "--out",
        out.to_str().unwrap(),
    ]);
    ok(&run);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["data"]["observations"], 12);
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
    assert_eq!(summary["execution"]["workers"], 2);
    assert!(out.join("trace_run0.csv").exists() && out.join("trace_run1.csv").exists());
}

#[test]
fn config_file_with_flag_overrides_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/lgssm_first_order.toml");
    let mut summaries = Vec::new();
    for (i, workers) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("r{i}"));
        ok(&crn_smc(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--n-samples",
            "8",
            "--n-particles",
            "16",
            "--iterations",
            "2",
            "--observations",
            "20",
            "--mc-runs",
            "1",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]));
        let s = std::fs::read_to_string(out.join("summary.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["proposal"], "first-order");
        assert_eq!(v["step_size"], 0.085);
        summaries.push(deterministic_part(&s).unwrap());
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn invalid_configuration_is_rejected_with_a_message() {
    let out = crn_smc(&["run", "--n-samples", "48"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("invalid `n-samples`: must be a power of two ≥ 2, got 48"), "{err}");

    let out = crn_smc(&["run", "--step-size", "0"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("step-size"));
}

#[test]
fn bench_truncates_and_writes_scaling_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = crn_smc(&[
        "bench",
        "--n-samples",
        "8",
        "--n-particles",
        "8",
        "--iterations",
        "2",
        "--observations",
        "10",
        "--workers-list",
        "1,2,3,1024",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping worker counts"));
    let csv = std::fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert!(csv.starts_with("P,runtime_s,speedup\n1,"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let layer = crn_smc_runner::config::ConfigLayer::load(&p).unwrap();
        layer.resolve().unwrap();
        n += 1;
    }
    assert_eq!(n, 4);
}
