//! End-to-end tests of the command-line interface.

use std::path::Path;
use std::process::{Command, Output};

fn adaptrust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptrust"))
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

fn generate_into(dir: &Path) {
    let out = adaptrust(&[
        "generate",
        "--out",
        dir.to_str().unwrap(),
        "--indicators",
        "2",
        "--num-services",
        "30",
        "--num-usages",
        "8",
        "--multi-use-items",
        "10",
        "--seed",
        "42",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn generate_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    generate_into(dir.path());
    for file in [
        "ratings.csv",
        "services.json",
        "usages.json",
        "ground_truth.json",
        "multi_use.json",
    ] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
}

#[test]
fn detect_indicators_reports_count_and_partition() {
    let dir = tempfile::tempdir().unwrap();
    generate_into(dir.path());
    let out = adaptrust(&[
        "detect-indicators",
        "--ratings",
        dir.path().join("ratings.csv").to_str().unwrap(),
        "--services",
        dir.path().join("services.json").to_str().unwrap(),
        "--usages",
        dir.path().join("usages.json").to_str().unwrap(),
        "--epsilon",
        "0.15",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("indicators: 2"), "{text}");
    assert!(text.contains("block 0"), "{text}");
    assert!(text.contains("block 1"), "{text}");
}

fn train_into(data: &Path, model: &Path) {
    let out = adaptrust(&[
        "train",
        "--ratings",
        data.join("ratings.csv").to_str().unwrap(),
        "--services",
        data.join("services.json").to_str().unwrap(),
        "--usages",
        data.join("usages.json").to_str().unwrap(),
        "--model-dir",
        model.to_str().unwrap(),
        "--epochs",
        "500",
        "--hidden",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn train_then_assess_single_usage() {
    let dir = tempfile::tempdir().unwrap();
    generate_into(dir.path());
    let model = dir.path().join("model");
    train_into(dir.path(), &model);
    assert!(model.join("meta.json").exists());
    assert!(model.join("service_model.json").exists());
    assert!(model.join("usage_model.json").exists());

    let out = adaptrust(&[
        "assess",
        "--model-dir",
        model.to_str().unwrap(),
        "--services",
        dir.path().join("services.json").to_str().unwrap(),
        "--usages",
        dir.path().join("usages.json").to_str().unwrap(),
        "--service-id",
        "s0000",
        "--usage-id",
        "u0000",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("trust value:"), "{text}");
    assert!(text.contains("trust level:"), "{text}");

    // The CLI is a thin wrapper: its score equals the library's.
    let pair = adaptrust::synth::load_model_pair(&model).unwrap();
    let services =
        adaptrust::synth::load_services(&dir.path().join("services.json")).unwrap();
    let usages = adaptrust::synth::load_usages(&dir.path().join("usages.json")).unwrap();
    let service = services.services.iter().find(|s| s.id == "s0000").unwrap();
    let usage = usages.iter().find(|u| u.id == "u0000").unwrap();
    let score = adaptrust::trust::assess(&pair, service, usage).unwrap();
    assert!(text.contains(&format!("trust value: {:.4}", score.value)), "{text}");
    assert!(text.contains(&format!("trust level: {}", score.level)), "{text}");
}

#[test]
fn assess_pattern_with_weighted_aggregation() {
    let dir = tempfile::tempdir().unwrap();
    generate_into(dir.path());
    let model = dir.path().join("model");
    train_into(dir.path(), &model);
    let out = adaptrust(&[
        "assess",
        "--model-dir",
        model.to_str().unwrap(),
        "--services",
        dir.path().join("services.json").to_str().unwrap(),
        "--usages",
        dir.path().join("usages.json").to_str().unwrap(),
        "--service-id",
        "s0001",
        "--pattern",
        "u0000,u0001,u0002",
        "--durations",
        "30,10,5",
        "--aggregation",
        "weighted",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("trust value:"));
}

#[test]
fn evaluate_prints_table_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    generate_into(dir.path());
    let report_path = dir.path().join("report.json");
    let out = adaptrust(&[
        "evaluate",
        "--ratings",
        dir.path().join("ratings.csv").to_str().unwrap(),
        "--services",
        dir.path().join("services.json").to_str().unwrap(),
        "--usages",
        dir.path().join("usages.json").to_str().unwrap(),
        "--epochs",
        "500",
        "--hidden",
        "8",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("macro"), "{text}");
    let report: adaptrust::eval::EvaluationReport =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.version, 1);
}

#[test]
fn evaluate_multi_use_sessions() {
    let dir = tempfile::tempdir().unwrap();
    generate_into(dir.path());
    let out = adaptrust(&[
        "evaluate",
        "--ratings",
        dir.path().join("ratings.csv").to_str().unwrap(),
        "--services",
        dir.path().join("services.json").to_str().unwrap(),
        "--usages",
        dir.path().join("usages.json").to_str().unwrap(),
        "--epochs",
        "500",
        "--hidden",
        "8",
        "--multi-use",
        dir.path().join("multi_use.json").to_str().unwrap(),
        "--aggregation",
        "closeness",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("macro"));
}

#[test]
fn missing_required_flag_exits_one_and_names_it() {
    let out = adaptrust(&["detect-indicators"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--ratings"), "{}", stderr(&out));
}

#[test]
fn missing_input_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = adaptrust(&[
        "detect-indicators",
        "--ratings",
        missing.to_str().unwrap(),
        "--services",
        missing.to_str().unwrap(),
        "--usages",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn unknown_aggregation_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    generate_into(dir.path());
    let model = dir.path().join("model");
    train_into(dir.path(), &model);
    let out = adaptrust(&[
        "assess",
        "--model-dir",
        model.to_str().unwrap(),
        "--services",
        dir.path().join("services.json").to_str().unwrap(),
        "--usages",
        dir.path().join("usages.json").to_str().unwrap(),
        "--service-id",
        "s0000",
        "--pattern",
        "u0000,u0001",
        "--aggregation",
        "median",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("median"), "{}", stderr(&out));
}

#[test]
fn help_exits_zero() {
    let out = adaptrust(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("generate"));
}
