use std::process::Command;

fn hcm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hcm"))
}

#[test]
fn table_star_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let status = hcm()
        .args(["table-star", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("table-star.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.contains("0,100000,0.630,0.630"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("table-star.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["passed"], true);
}

#[test]
fn negative_lambda_list_parses() {
    let out = hcm()
        .args(["table-line", "--n", "1e5", "--lambda", "-10,10"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("-10,100000,0.623,0.636"));
    assert!(text.contains("10,100000,0.858,0.870"));
}

#[test]
fn generate_then_explore_file() {
    let dir = tempfile::tempdir().unwrap();
    let status = hcm()
        .args(["generate", "--n", "200", "--seed", "5", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let graph = dir.path().join("graph.txt");
    let out = hcm().args(["explore", "--graph"]).arg(&graph).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("k,tau_k,v,vH,SP,SPH"));
}

#[test]
fn failed_tolerance_sets_exit_code() {
    // The bounded-catalog tail grows between these two sizes, so the
    // directional check fails and the run exits with 1.
    let out = hcm()
        .args(["l2-diag", "--n", "1e4,3e4", "--replicas", "10", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("FAIL"));
}

#[test]
fn too_few_replicas_is_an_error() {
    let out = hcm().args(["perc-equiv", "--replicas", "5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rejects_small_n() {
    let out = hcm().args(["generate", "--n", "5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn percolate_reports_components() {
    let out = hcm()
        .args(["percolate", "--n", "300", "--pi", "0.6", "--mode", "uniform"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("rank,v\n1,"));
}
