use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bsrg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsrg"))
        .args(args)
        .output()
        .expect("bsrg runs")
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn passing_suites_exit_zero() {
    let cfg = scratch(
        "pass.json",
        r#"{"seed": 1, "suites": ["woodbury", "lattice"]}"#,
    );
    let out = bsrg(&["verify", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["passed"], true);
    assert!(report["suites"]["woodbury"]["checks"]["left identity"]["value"].is_string());
}

#[test]
fn failed_checks_exit_one() {
    // D = 0 makes the model's Green's function singular
    let cfg = scratch(
        "fail.json",
        r#"{"seed": 1, "suites": ["edA"], "draws": {"eda": 2},
            "model": {"kind": "explicit", "q_minus": [[1.0]], "q": [[1.0]], "fq": [[1.0]], "d": [[0.0]], "b": 1.0}}"#,
    );
    let out = bsrg(&["verify", "--config", arg(&cfg), "--format", "text"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed: edA / model"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] edA"));
}

#[test]
fn configuration_errors_exit_two() {
    let cfg = scratch("bad.json", r#"{"seed": 1, "field_scale": -1.0}"#);
    let out = bsrg(&["verify", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("field_scale"));
    let missing = bsrg(&["verify", "--config", "/nonexistent/scenario.json"]);
    assert_eq!(missing.status.code(), Some(2));
    let cfg = scratch("ok.json", r#"{"seed": 1, "suites": []}"#);
    let format = bsrg(&["verify", "--config", arg(&cfg), "--format", "yaml"]);
    assert_eq!(format.status.code(), Some(2));
}

#[test]
fn empty_suite_lists_report_metadata() {
    let cfg = scratch("empty.json", r#"{"seed": 7, "suites": []}"#);
    let out = bsrg(&["verify", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["checks"], 0);
    assert_eq!(report["config"]["seed"], 7);
}

#[test]
fn suite_flags_and_output_files() {
    let cfg = scratch("flags.json", r#"{"seed": 1, "suites": []}"#);
    let target = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli/report.json");
    let out = bsrg(&[
        "verify",
        "--config",
        arg(&cfg),
        "--suite",
        "woodbury",
        "--out",
        arg(&target),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&target).unwrap()).unwrap();
    assert_eq!(report["suites"].as_object().unwrap().len(), 1);
    assert!(report["suites"]["woodbury"].get("seconds").is_none());
}

#[test]
fn solvers_and_kernels_print_json() {
    let cfg = scratch("srm.json", r#"{"seed": 1}"#);
    let point = scratch(
        "point.json",
        r#"{"psi_star": [[0.1, 0.0]], "psi": [[0.2, 0.0]]}"#,
    );
    let out = bsrg(&[
        "solve-background",
        "--config",
        arg(&cfg),
        "--point",
        arg(&point),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let sol: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // scalar reference: 2φ = ψ − gφ², so φ = (√(1 + gψ) − 1)/g with g = 0.05, ψ = 0.2
    let phi = sol["phi"][0][0].as_f64().unwrap();
    assert!((phi - ((1.0f64 + 0.01).sqrt() - 1.0) / 0.05).abs() < 1e-12);

    let theta = scratch(
        "theta.json",
        r#"{"theta_star": [[0.1, 0.0]], "theta": [[0.1, 0.0]]}"#,
    );
    let out = bsrg(&[
        "solve-critical",
        "--config",
        arg(&cfg),
        "--point",
        arg(&theta),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let out = bsrg(&["kernels", "--config", arg(&cfg), "--dump"]);
    let k: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(k["dims"], serde_json::json!([1, 1, 1]));
    assert!(k["kernels"]["C"]["entries"].is_array());

    let bad = scratch("badpoint.json", r#"{"psi": [[0.2, 0.0]]}"#);
    let out = bsrg(&[
        "solve-background",
        "--config",
        arg(&cfg),
        "--point",
        arg(&bad),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("psi_star"));
}
