use std::path::{Path, PathBuf};
use std::process::Command;

use ccmin::cli::{vfld, EXIT_CONFIG, EXIT_FALSE, EXIT_PASS, OUT_DIR_ENV};
use ccmin::nonlin::AssumptionConstants;
use ccmin::NonlinearitySpec;
use serde_json::{json, Value};

fn family() -> Value {
    json!({"kind": "paper-example", "m": 2, "p0": 1.0, "q_inf": 1.0, "q1": 1.0, "terms": [[1.0, 1.0]]})
}

fn base() -> Value {
    json!({
        "grid": {"N": 1, "M": 256, "L": 16.0},
        "nonlinearity": family(),
        "c": 1.0
    })
}

struct Run {
    code: i32,
    out: PathBuf,
    _dir: tempfile::TempDir,
}

fn run(config: &Value, args: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let out = dir.path().join("out");
    let code = Command::new(env!("CARGO_BIN_EXE_ccmin"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .env_remove(OUT_DIR_ENV)
        .status()
        .unwrap()
        .code()
        .unwrap();
    Run { code, out, _dir: dir }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn nonpositive_mass_is_a_config_error() {
    let mut cfg = base();
    cfg["c"] = json!(0.0);
    assert_eq!(run(&cfg, &["solve"]).code, EXIT_CONFIG);
    cfg["c"] = json!(-1.0);
    assert_eq!(run(&cfg, &["verify", "negativity"]).code, EXIT_CONFIG);
}

#[test]
fn unknown_lemma_and_unknown_key() {
    assert_eq!(run(&base(), &["verify", "compactness"]).code, EXIT_CONFIG);
    let mut cfg = base();
    cfg["colour"] = json!(1);
    assert_eq!(run(&cfg, &["solve"]).code, EXIT_CONFIG);
}

#[test]
fn missing_config_file() {
    let code = Command::new(env!("CARGO_BIN_EXE_ccmin"))
        .args(["solve", "--config", "/nonexistent/cfg.json"])
        .status()
        .unwrap()
        .code()
        .unwrap();
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn comparison_without_gap_fails() {
    let mut cfg = base();
    cfg["nonlinearity"]["p0"] = json!(0.0);
    cfg["nonlinearity"]["q1"] = json!(0.0);
    let r = run(&cfg, &["verify", "comparison"]);
    assert_eq!(r.code, EXIT_FALSE);
    let report = read_json(&r.out.join("comparison.json"));
    assert_eq!(report["verdict"], "fail");
    assert_eq!(report["command"], "verify");
}

#[test]
fn negativity_passes_on_default_family() {
    let r = run(&base(), &["verify", "negativity"]);
    assert_eq!(r.code, EXIT_PASS);
    let report = read_json(&r.out.join("negativity.json"));
    assert_eq!(report["verdict"], "pass");
    assert!(report["inputs"]["spec_digest"].as_str().unwrap().len() == 64);
}

#[test]
fn check_assumptions_exit_codes() {
    let spec = NonlinearitySpec::default_example();
    let mut cfg = base();
    cfg["constants"] = serde_json::to_value(AssumptionConstants::suggested(&spec)).unwrap();
    let r = run(&cfg, &["check-assumptions"]);
    assert_eq!(r.code, EXIT_PASS);
    assert_eq!(read_json(&r.out.join("assumptions.json"))["all_hold"], true);

    let coupled = NonlinearitySpec::CoupledPower { p: 2.0, beta: -1.5 };
    let mut cfg = base();
    cfg["nonlinearity"] = serde_json::to_value(&coupled).unwrap();
    cfg["constants"] = serde_json::to_value(AssumptionConstants::suggested(&coupled)).unwrap();
    let r = run(&cfg, &["check-assumptions"]);
    assert_eq!(r.code, EXIT_FALSE);
    assert_eq!(read_json(&r.out.join("assumptions.json"))["all_hold"], false);

    assert_eq!(run(&base(), &["check-assumptions"]).code, EXIT_CONFIG);
}

#[test]
fn scan_lists_are_checked() {
    let mut cfg = base();
    cfg["c_values"] = json!([]);
    assert_eq!(run(&cfg, &["scan"]).code, EXIT_CONFIG);
    cfg["c_values"] = json!([1.0, 0.8]);
    assert_eq!(run(&cfg, &["scan"]).code, EXIT_CONFIG);
}

#[test]
fn scan_writes_csv_and_json() {
    let mut cfg = base();
    cfg["c_values"] = json!([0.8, 1.0, 1.2]);
    let r = run(&cfg, &["scan"]);
    assert_eq!(r.code, EXIT_PASS);
    let csv = std::fs::read_to_string(r.out.join("scan.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "c,energy,multiplier,residual");
    assert_eq!(lines.len(), 4);
    let points = read_json(&r.out.join("scan.json"))["points"].clone();
    let energies: Vec<f64> = points.as_array().unwrap().iter().map(|p| p["energy"].as_f64().unwrap()).collect();
    assert!(energies.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn solve_outputs_are_consistent() {
    let mut cfg = base();
    cfg["radii"] = json!([1.0, 4.0, 64.0]);
    let r = run(&cfg, &["solve"]);
    assert_eq!(r.code, EXIT_PASS);
    let report = read_json(&r.out.join("report.json"));
    assert_eq!(report["format_version"], 1);
    assert_eq!(report["converged"], true);
    let u = vfld::read(&r.out.join("minimizer.vfld")).unwrap();
    assert_eq!(u.m(), 2);
    assert!((u.mass() - 1.0).abs() < 1e-12);
    let trace = std::fs::read_to_string(r.out.join("trace.csv")).unwrap();
    let rows = trace.lines().count() - 1;
    assert_eq!(rows as u64, report["iterations"].as_u64().unwrap() + 1);
    let q = report["concentration"]["Q_values"].as_array().unwrap();
    assert!((q[2].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn seed_flag_changes_digest_only_through_config() {
    let a = run(&base(), &["solve", "--seed", "3"]);
    let b = run(&base(), &["solve", "--seed", "3"]);
    let c = run(&base(), &["solve", "--seed", "4"]);
    let ra = read_json(&a.out.join("report.json"));
    let rb = read_json(&b.out.join("report.json"));
    let rc = read_json(&c.out.join("report.json"));
    assert_eq!(ra, rb);
    assert_ne!(ra["config_digest"], rc["config_digest"]);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, base().to_string()).unwrap();
    let out = dir.path().join("env-out");
    let code = Command::new(env!("CARGO_BIN_EXE_ccmin"))
        .args(["verify", "negativity", "--config"])
        .arg(&path)
        .env(OUT_DIR_ENV, &out)
        .status()
        .unwrap()
        .code()
        .unwrap();
    assert_eq!(code, EXIT_PASS);
    assert!(out.join("negativity.json").exists());
}
