//! End-to-end checks of the command-line driver: artifact shapes and
//! exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vesseldg"))
}

#[test]
fn mms3d_writes_three_row_rate_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["mms3d", "--levels", "2,3,4", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4); // header + 3 levels
    for line in &lines {
        // h column + 4 (error, rate) pairs
        assert_eq!(line.split(',').count(), 9, "{line}");
    }
    assert!(dir.path().join("u3d.vtk").exists());
    assert!(dir.path().join("u1d.vtk").exists());
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["config"]["epsilon1"], -1);
    assert!(json["norms"].as_array().unwrap().len() >= 4);
}

#[test]
fn missing_network_file_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["solve", "--network", "does_not_exist.json", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let n_entries = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(n_entries, 0, "no partial artifacts expected");
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["mms3d", "--levels", "2", "--k2", "3", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn vessel_outside_box_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    // A tiny explicit padding leaves the section circles of this thick
    // vessel outside the box.
    std::fs::write(
        &net,
        r#"{"vertices":[{"id":0,"x":0,"y":0,"z":0},{"id":1,"x":1,"y":0,"z":0}],
            "edges":[{"v0":0,"v1":1,"radius":0.2,"xi":1.0}]}"#,
    )
    .unwrap();
    let out = bin()
        .args(["solve", "--mesh-n", "4", "--padding", "0.01", "--network"])
        .arg(&net)
        .args(["--out-dir"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!Path::new(&dir.path().join("out")).exists());
}

#[test]
fn solve_on_small_tree_produces_positive_vessel_field() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("tree.json");
    std::fs::write(
        &net,
        r#"{"vertices":[
             {"id":0,"x":0.0,"y":0.0,"z":0.0},
             {"id":1,"x":0.0,"y":0.0,"z":0.3},
             {"id":2,"x":-0.2,"y":0.0,"z":0.55},
             {"id":3,"x":0.2,"y":0.0,"z":0.55}],
            "edges":[
             {"v0":0,"v1":1,"radius":0.04,"xi":1.0},
             {"v0":1,"v1":2,"radius":0.03,"xi":1.0},
             {"v0":1,"v1":3,"radius":0.03,"xi":1.0}]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["solve", "--mesh-n", "6", "--f-hat", "1", "--network"])
        .arg(&net)
        .args(["--out-dir"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    let norm = |name: &str| -> f64 {
        json["norms"]
            .as_array()
            .unwrap()
            .iter()
            .find(|n| n["name"] == name)
            .unwrap()["value"]
            .as_f64()
            .unwrap()
    };
    assert!(norm("u1d_min") > 0.0);
    // 3D field nonnegative up to DG undershoots near the vessel.
    assert!(norm("u3d_max") > 0.0);
    assert!(norm("u3d_min") > -0.5 * norm("u3d_max"));
    assert!(norm("conservation_residual") < 1e-8);
    assert!(out_dir.join("u3d.vtk").exists());
    assert!(out_dir.join("u1d.vtk").exists());
}
