use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn rigidlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigidlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check named {name}"))
}

#[test]
fn sphere_identities_pass() {
    let out = rigidlab(&["check-surface", "sphere(1)", "--grid", "8x8"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema"], "rigidlab-report/1");
    assert_eq!(r["verdict"], "pass");
    assert!(check(&r, "gauss-equation")["max_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn surface_from_file() {
    let path = data("ellipsoid.json");
    let out = rigidlab(&["check-surface", path.to_str().unwrap(), "--grid", "6x6"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn degenerate_pointwise_gauss_fails() {
    let out = rigidlab(&["pointwise-gauss", "--h", "1,1,0", "--dim", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["verdict"], "fail");
    assert_eq!(r["checks"][0]["value"].as_f64(), Some(2.0));
}

#[test]
fn rank_two_file_is_not_certified() {
    let path = data("h_rank2.json");
    let out = rigidlab(&["pointwise-gauss", "--h-file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let full = rigidlab(&["pointwise-gauss", "--h", "1,2,3", "--dim", "3"]);
    assert_eq!(full.status.code(), Some(0));
}

#[test]
fn catalog_lists_surfaces() {
    let out = rigidlab(&["catalog"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["plane", "sphere", "ellipsoid", "cylinder", "saddle", "quartic-cap"] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(rigidlab(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(rigidlab(&["check-surface", "sphere(1)", "--grid", "abc"]).status.code(), Some(64));
    assert_eq!(rigidlab(&["check-surface", "torus(1)"]).status.code(), Some(64));
    assert_eq!(rigidlab(&["pair-check", "/nonexistent.json"]).status.code(), Some(64));
    assert_eq!(rigidlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn cylinder_pair_report() {
    let path = data("cylinders.json");
    let out = rigidlab(&["pair-check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!(check(&r, "metric-deviation")["max_residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(check(&r, "gauss-trace")["metadata"]["cofactor_form"], true);
}

#[test]
fn identical_spheres_have_positive_energy() {
    let path = data("spheres.json");
    let out = rigidlab(&["pair-check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let e = check(&r, "energy-positivity");
    assert_eq!(e["verdict"], "pass");
    let ip = e["metadata"]["inner_product"].as_f64().unwrap();
    assert!((ip - 16.0 * std::f64::consts::PI).abs() < 1e-6 * ip);
}

#[test]
fn flex_kernel_writes_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("r.json");
    let out = rigidlab(&[
        "flex-kernel",
        "sphere(1)",
        "--grid",
        "16x8",
        "--report",
        rep.to_str().unwrap(),
        "--csv-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    assert_eq!(r["checks"][0]["value"].as_f64(), Some(6.0));
    let mut csv = csv::Reader::from_path(dir.path().join("singular_values.csv")).unwrap();
    assert!(csv.records().count() > 6);

    let flat = rigidlab(&["flex-kernel", "plane", "--grid", "6x6"]);
    assert_eq!(flat.status.code(), Some(2));
}

#[test]
fn rotation_field_is_trivial() {
    let path = data("rotation.json");
    let out = rigidlab(&["flex-kernel", "ellipsoid(1,1.5,2)", "--grid", "8x6", "--field", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&out);
    assert_eq!(check(&r, "first-order-isometry")["verdict"], "pass");
    assert_eq!(check(&r, "phi-relation")["verdict"], "pass");
}

#[test]
fn boundary_from_expression_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = rigidlab(&[
        "boundary",
        "--kg",
        "1",
        "--f",
        "sin(2*x1)",
        "--csv-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("gamma.csv").exists());
    assert!(dir.path().join("uv.csv").exists());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("-1.047197551196"));

    let path = data("kg_ellipse.csv");
    let out = rigidlab(&["boundary", "--kg-csv", path.to_str().unwrap(), "--random-f", "3", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn non_closing_profile_fails() {
    let out = rigidlab(&["boundary", "--kg-arc", "2", "--length", "6.283185307179586"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["verdict"], "fail");
}

#[test]
fn quartic_cap_edge() {
    let out = rigidlab(&["boundary", "--surface", "quartic-cap", "--edge", "x1-lo"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
