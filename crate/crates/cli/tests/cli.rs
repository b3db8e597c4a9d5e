use std::process::{Command, Output};

fn sbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbm"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn mesh_reports_marker_counts() {
    let v = json(&sbm(&["mesh", "--case", "ring2d", "--base-level", "3", "--boundary-level", "4"]));
    assert_eq!(v["dim"], 2);
    assert_eq!(v["boundary_level"], 4);
    let markers: u64 = v["markers"].as_object().unwrap().values().map(|n| n.as_u64().unwrap()).sum();
    assert_eq!(markers, v["leaves"].as_u64().unwrap());
}

#[test]
fn solve_linear_patch_is_exact() {
    let v = json(&sbm(&["solve", "--case", "linear-patch", "--base-level", "3", "--boundary-level", "3", "--tol", "1e-12"]));
    assert!(v["l2_error"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["solver"]["converged"], true);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"case": "ring2d", "levels": [3, 4], "offset": 1, "method": "direct"}"#).unwrap();
    let out = sbm(&["convergence", "--config", cfg.to_str().unwrap(), "--levels", "3,4,5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("5,6,"));
}

#[test]
fn export_vtk_writes_a_legacy_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("disk.vtk");
    let out = sbm(&["export-vtk", "--case", "linear-patch", "--geometry", "disk", "--base-level", "3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# vtk DataFile Version 3.0"));
    assert!(text.contains("von_mises"));
}

#[test]
fn bad_input_fails_cleanly() {
    for args in [
        &["solve", "--method", "gauss"][..],
        &["solve", "--case", "torus"],
        &["geom-metrics", "--case", "icosphere"],
        &["solve", "--case", "eiffel"],
    ] {
        let out = sbm(args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}
