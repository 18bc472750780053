use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const CHSH: &str = "<A0 B0> + <A0 B1> + <A1 B0> - <A1 B1>";

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> String {
    root().join("scenarios").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inflation"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn golden(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn relax_matches_golden_reports() {
    let out = run(&["--json", "relax", "-s", &scenario("bell.json"), "-c", "npa1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out), golden("bell_npa1_relax.json"));

    let out = run(&[
        "--json",
        "relax",
        "-s",
        &scenario("triangle.json"),
        "-c",
        "physical2",
        "--max-length",
        "4",
    ]);
    let report = json_of(&out);
    assert_eq!(report, golden("triangle_physical2_relax.json"));
    assert_eq!(report["columns"], 287);
}

#[test]
fn relax_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let out = run(&["relax", "-s", &scenario("bell.json"), "-c", "npa1", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(csv).unwrap();
    // header row plus one row per column
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn chsh_is_optimal() {
    let out = run(&["solve", "-s", &scenario("bell.json"), "-c", "npa1", "-o", CHSH]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("optimal 2.8284"), "{text}");

    let out = run(&["--json", "solve", "-s", &scenario("bell.json"), "-c", "npa1", "-o", CHSH]);
    let v = json_of(&out);
    assert_eq!(v["status"], "optimal");
    assert!((v["objective_value"].as_f64().unwrap() - 8f64.sqrt()).abs() < 1e-6);
}

#[test]
fn w_is_infeasible_with_certificate_file() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let out = run(&[
        "--json",
        "solve",
        "-s",
        &scenario("triangle.json"),
        "-c",
        "npa2",
        "-d",
        &scenario("w.json"),
        "--certificate",
        cert.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_of(&out)["status"], "infeasible");
    let written: Value = serde_json::from_str(&std::fs::read_to_string(cert).unwrap()).unwrap();
    assert!(written["terms"].as_array().unwrap().len() > 1);
    assert_eq!(written["distribution_specific"], false);
}

#[test]
fn certify_prints_inequality() {
    let out = run(&["certify", "-s", &scenario("bell.json"), "-c", "npa1", "-d", &scenario("pr_box.json")]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("pAB(00|00)") && text.trim_end().ends_with(">= 0"), "{text}");

    let out = run(&["certify", "-s", &scenario("bell.json"), "-c", "npa1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_problem_is_unknown() {
    let out = run(&["solve", "-s", &scenario("bell.json"), "-c", "npa2", "-o", CHSH, "--size-cap", "3"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SDPA"));
}

#[test]
fn supports_mode_hardy() {
    let args = ["solve", "-s", &scenario("instrumental.json"), "-c", "local1", "--commuting", "--supports"];
    let mut hardy = args.to_vec();
    let h = scenario("hardy_support.json");
    hardy.extend(["-d", &h]);
    assert_eq!(run(&hardy).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.txt");
    let mut text = String::from("2 2 3 1\n");
    text.push_str(&["0.25"; 12].join(" "));
    std::fs::write(&full, text).unwrap();
    let mut ok = args.to_vec();
    let f = full.display().to_string();
    ok.extend(["-d", &f]);
    assert_eq!(run(&ok).status.code(), Some(0));

    let mut bad = args.to_vec();
    bad.extend(["-o", "pA(0|0)"]);
    assert_eq!(run(&bad).status.code(), Some(2));
}

#[test]
fn critical_on_constant_family_is_hi() {
    let dir = tempfile::tempdir().unwrap();
    let uniform = dir.path().join("u.json");
    std::fs::write(&uniform, "[[[[0.25, 0.25], [0.25, 0.25]], [[0.25, 0.25], [0.25, 0.25]]], [[[0.25, 0.25], [0.25, 0.25]], [[0.25, 0.25], [0.25, 0.25]]]]").unwrap();
    let out = run(&[
        "--json",
        "critical",
        "-s",
        &scenario("bell.json"),
        "-c",
        "npa1",
        "-d",
        uniform.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["value"], 1.0);
    assert_eq!(v["all_feasible"], true);
    assert_eq!(v["solves"], 1);
}

#[test]
fn critical_bisection_counts_solves() {
    let out = run(&[
        "--json",
        "critical",
        "-s",
        &scenario("bell.json"),
        "-c",
        "npa1",
        "-d",
        &scenario("pr_box.json"),
        "--method",
        "bisection",
        "--tolerance",
        "1e-3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["solves"], 10);
    // PR box mixed with white noise leaves the quantum set at v = 1/√2
    assert!((v["value"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-3);
}

#[test]
fn export_writes_sdpa() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chsh.dat-s");
    let out = run(&[
        "export",
        "-s",
        &scenario("bell.json"),
        "-c",
        "npa1",
        "-o",
        CHSH,
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let parsed = free_variables(&text);
    assert_eq!(parsed, 10);
}

/// Number of free variables in an SDPA file.
fn free_variables(text: &str) -> usize {
    text.lines()
        .find(|l| !l.starts_with('"'))
        .unwrap()
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["relax", "-s", &scenario("bell.json"), "-c", "bogus"]).status.code(), Some(2));
    assert_eq!(run(&["relax", "-s", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let out = run(&["--json", "relax", "-s", &scenario("bell.json"), "-c", "bogus"]);
    assert!(json_of(&out)["error"].as_str().unwrap().contains("bogus"));
}

#[test]
fn about_lists_version() {
    let out = run(&["--json", "about"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["size_cap"], 400);
}
