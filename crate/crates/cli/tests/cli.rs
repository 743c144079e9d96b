//! End-to-end checks of the `fadesched` binary: exit codes, file outputs,
//! and report determinism, all through the real process boundary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fadesched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fadesched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn gen_ratio2(dir: &Path) {
    let out = fadesched(&["gen", "ratio2", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn gen_writes_instances_and_expected_value_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    gen_ratio2(dir.path());
    for name in ["ratio2-a.json", "ratio2-a.expected.json", "ratio2-b.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ratio2-a.expected.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["expected_optimal"], 2.0);
}

#[test]
fn gen_accepts_a_random_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{
            "family": "random",
            "count": 3,
            "packets_per_instance": 4,
            "horizon": 10,
            "weights": { "uniform": { "lo": 0.5, "hi": 3.0 } },
            "slack": [0, 2],
            "fade": { "iid": { "support": [0.5, 1.0] } }
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("instances");
    let out = fadesched(&[
        "gen",
        spec.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "9",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let count = fs::read_dir(&out_dir).unwrap().count();
    assert_eq!(count, 3);
    assert!(out_dir.join("random-00001.json").exists());
}

#[test]
fn validate_accepts_generated_instances_and_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    gen_ratio2(dir.path());
    let good = dir.path().join("ratio2-a.json");
    let out = fadesched(&["validate", good.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("ok"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"horizon": 2, "qualities": [0.5], "packets": []}"#).unwrap();
    let out = fadesched(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn oracle_prints_the_optimum_and_honors_its_cap() {
    let dir = tempfile::tempdir().unwrap();
    gen_ratio2(dir.path());
    let instance = dir.path().join("ratio2-a.json");
    let out = fadesched(&["oracle", instance.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let outcome: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(outcome["throughput"], 2.0);

    let out = fadesched(&["oracle", instance.to_str().unwrap(), "--cap", "1"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("cap"));
}

#[test]
fn validate_checks_outcomes_against_instances() {
    let dir = tempfile::tempdir().unwrap();
    gen_ratio2(dir.path());
    let instance = dir.path().join("ratio2-a.json");
    let outcome_path = dir.path().join("outcome.json");
    let oracle_out = fadesched(&["oracle", instance.to_str().unwrap()]);
    fs::write(&outcome_path, stdout(&oracle_out)).unwrap();
    let out = fadesched(&[
        "validate",
        instance.to_str().unwrap(),
        "--outcome",
        outcome_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // Claim an extra delivery: the throughput no longer matches.
    let mut doctored: serde_json::Value =
        serde_json::from_str(&stdout(&oracle_out)).unwrap();
    doctored["throughput"] = serde_json::json!(5.0);
    fs::write(&outcome_path, doctored.to_string()).unwrap();
    let out = fadesched(&[
        "validate",
        instance.to_str().unwrap(),
        "--outcome",
        outcome_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("violation"));
}

fn run_config(dir: &Path, policies: &str, cap: usize) -> std::path::PathBuf {
    let csv = dir.join("report.csv");
    let json = dir.join("report.json");
    let config = dir.join("config.json");
    fs::write(
        &config,
        format!(
            r#"{{
                "instances": {{ "generator": {{ "family": "ratio2" }} }},
                "policies": [{policies}],
                "oracle_cap": {cap},
                "csv_out": {csv:?},
                "json_out": {json:?}
            }}"#,
        ),
    )
    .unwrap();
    config
}

#[test]
fn run_reports_the_ratio2_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_config(
        dir.path(),
        r#"{ "policy": "nonabort-commit", "mode": "fade_unknown_with_commit_oracle" }"#,
        12,
    );
    let out = fadesched(&["run", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("max ratio 2.000000"), "{}", stdout(&out));
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("instance_id,policy,mode,"));
    assert_eq!(csv.lines().count(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn illegal_policy_mode_pairs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_config(
        dir.path(),
        r#"{ "policy": "edf:beta=2", "mode": "fade_unknown_with_commit_oracle" }"#,
        12,
    );
    let out = fadesched(&["run", config.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("requires mode"), "{}", stderr(&out));
}

#[test]
fn deny_skips_turns_cap_skips_into_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_config(
        dir.path(),
        r#"{ "policy": "greedy-max", "mode": "fade_unknown_with_commit_oracle" }"#,
        2,
    );
    let out = fadesched(&["run", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "skips are allowed by default: {}", stderr(&out));
    let out = fadesched(&["run", config.to_str().unwrap(), "--deny-skips"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn reports_are_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    let csv = dir.path().join("report.csv");
    fs::write(
        &config,
        format!(
            r#"{{
                "instances": {{ "generator": {{
                    "family": "random",
                    "count": 8,
                    "packets_per_instance": 5,
                    "horizon": 10,
                    "weights": {{ "uniform": {{ "lo": 0.5, "hi": 3.0 }} }},
                    "slack": [0, 2],
                    "fade": {{ "constant": {{ "q": 0.5 }} }}
                }} }},
                "policies": [
                    {{ "policy": "semi-greedy:alpha=phi",
                       "mode": "fade_unknown_with_commit_oracle" }}
                ],
                "csv_out": {csv:?},
                "seed": 11
            }}"#,
        ),
    )
    .unwrap();
    let out = fadesched(&["run", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let first = fs::read(&csv).unwrap();
    let out = fadesched(&["run", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(&csv).unwrap(), first);
}

#[test]
fn sweep_writes_one_row_per_parameter_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    let csv = dir.path().join("sweep.csv");
    fs::write(
        &config,
        format!(
            r#"{{
                "parameter": "alpha",
                "values": [1.5, 2.0],
                "instances": {{ "generator": {{ "family": "ratio2" }} }},
                "csv_out": {csv:?}
            }}"#,
        ),
    )
    .unwrap();
    let out = fadesched(&["sweep", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv_text = fs::read_to_string(&csv).unwrap();
    assert_eq!(csv_text.lines().count(), 3);
    assert!(csv_text.lines().nth(1).unwrap().starts_with("alpha,1.50000000000e0,"));
}

#[test]
fn unknown_policies_fail_with_a_helpful_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_config(
        dir.path(),
        r#"{ "policy": "vogon", "mode": "fade_known" }"#,
        12,
    );
    let out = fadesched(&["run", config.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("unknown policy"), "{}", stderr(&out));
}
