use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ephemera"));
    cmd.env("EPHEMERA_THREADS", "2");
    cmd
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).current_dir(root()).output().expect("binary runs")
}

fn schema(name: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(root().join("schemas").join(name)).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(validator: &jsonschema::Validator, value: &Value) {
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn labels(v: &Value) -> Vec<String> {
    v["points"].as_array().unwrap().iter().map(|p| p["report"]["label"].as_str().unwrap().to_string()).collect()
}

#[test]
fn classify_point_zero_is_focus_focus_ephemeral() {
    let out = run(&["classify", "catalog/family_11m1.json", "--point-index", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&schema("report_bundle.schema.json"), &v);
    assert_eq!(labels(&v), vec!["nondegenerate-ephemeral(focus-focus)"]);
    let bytes = std::fs::read(root().join("catalog/family_11m1.json")).unwrap();
    use sha2::Digest;
    let hash: String = sha2::Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(v["input_sha256"], hash);
}

#[test]
fn classify_degree_three_family_has_degenerate_ephemeral_point() {
    let out = run(&["classify", "catalog/family_21m1.json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(labels(&v).iter().any(|l| l == "degenerate-ephemeral"));
}

#[test]
fn classify_writes_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&["classify", "ex1_zN", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(labels(&v), vec!["degenerate-ephemeral", "regular"]);
}

#[test]
fn malformed_and_invalid_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": ").unwrap();
    let out = run(&["classify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
    let invalid = dir.path().join("invalid.json");
    std::fs::write(&invalid, "{\"name\": \"x\", \"weights\": [[1, 1, 1], [2, 2, 2]]}").unwrap();
    assert_eq!(run(&["classify", invalid.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["classify", "family_11m1", "--point-index", "99"]).status.code(), Some(2));
    assert_eq!(run(&["classify", "no_such_thing"]).status.code(), Some(2));
}

#[test]
fn fiber_scan_consistent_with_csv_and_clamp_warning() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("table.csv");
    let out = run(&[
        "fiber-scan",
        "family_11m1",
        "--resolution",
        "8",
        "--beta-grid",
        "0.5:1.5:2",
        "--c-grid",
        "5",
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("clamped to 64"), "{stderr}");
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&schema("report_bundle.schema.json"), &v);
    assert_eq!(v["connectivity"]["verdict"], "consistent-true");
    assert_eq!(v["connectivity"]["resolution"], 64);
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, ["beta", "c", "components", "idx0", "idx1", "idx2", "chi", "verdict"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4 * 5);
    for r in &rows {
        assert_eq!(&r[2], "1");
        assert_eq!(&r[6], "2");
        assert_eq!(&r[7], "consistent-true");
        assert_eq!(r[0].split(',').count(), 2);
    }
}

#[test]
fn fiber_scan_rejects_non_proper() {
    assert_eq!(run(&["fiber-scan", "ex2_pq"]).status.code(), Some(2));
    assert_eq!(run(&["fiber-scan", "family_11m1", "--beta-grid", "1:2"]).status.code(), Some(2));
}

#[test]
fn ephemeral_test_outputs() {
    let out = run(&["ephemeral-test", "--xi", "2,1", "--json", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&schema("ephemeral_test.schema.json"), &v);
    assert_eq!(v["ephemeral"], true);
    assert_eq!(v["zero_set"], "line");
    assert!(v["rotation_max_delta"].as_f64().unwrap() <= 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let terms = dir.path().join("norm.json");
    std::fs::write(&terms, r#"[{"a": [2], "b": [2], "c": "1"}]"#).unwrap();
    let out = run(&["ephemeral-test", "--xi", "4", "--terms", terms.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["ephemeral"], false);
    assert_eq!(run(&["ephemeral-test", "--xi", "1,-1"]).status.code(), Some(2));
    assert_eq!(run(&["ephemeral-test", "--xi", "a"]).status.code(), Some(2));
}

#[test]
fn catalog_list_and_show() {
    let out = run(&["catalog", "list"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).lines().count() >= 4);
    let out = run(&["catalog", "list", "--json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&schema("catalog_summary.schema.json"), &v);
    assert!(v.as_array().unwrap().len() >= 4);

    let out = run(&["catalog", "show", "ex1_zN", "--json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&schema("catalog_summary.schema.json"), &v);
    assert_eq!(v["xi"], serde_json::json!([3]));
    assert_eq!(v["degree"], 3);
    let out = run(&["catalog", "show", "ex2_pq"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("z1^2 z2") && text.contains("tall: true"), "{text}");
    assert_eq!(run(&["catalog", "show", "missing"]).status.code(), Some(2));
}

#[test]
fn catalog_files_match_schema_and_raw_output() {
    let validator = schema("system_spec.schema.json");
    for name in ["ex1_zN", "ex2_pq", "family_11m1", "family_21m1"] {
        let text = std::fs::read_to_string(root().join("catalog").join(format!("{name}.json"))).unwrap();
        assert_valid(&validator, &serde_json::from_str(&text).unwrap());
        let out = run(&["catalog", "show", name, "--raw"]);
        assert_eq!(String::from_utf8(out.stdout).unwrap(), text);
    }
}
