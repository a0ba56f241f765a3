use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn realid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_realid"))
        .args(args)
        .env_remove(realid::OUTPUT_DIR_ENV)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn segre_profile() {
    let out = realid(&["segre", "profile", "--dims", "2,4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!((v["a_q"].as_u64(), v["D"].as_u64(), v["parity"].as_str()), (Some(9), Some(15), Some("even")));
    assert_eq!(v["schema"], realid::SCHEMA);
    assert_eq!(v["config"]["seed"], 0);
}

#[test]
fn segre_section_of_five_real_points() {
    let out = realid(&["segre", "section", "--dims", "2,2", "--span-real", "5", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["signature"], serde_json::json!([6, 0]));
    assert_eq!(v["points"].as_array().unwrap().len(), 6);
    assert_eq!(v["L"].as_array().unwrap().len(), 4);
}

#[test]
fn segre_search_exhaustion_exits_3() {
    let out = realid(&["segre", "search", "--dims", "2,2", "--target", "4,2", "--max-attempts", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_of(&out)["found"], false);
}

#[test]
fn segre_bad_target_exits_1() {
    let out = realid(&["segre", "search", "--dims", "2,2", "--target", "5,1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("even"));
}

#[test]
fn waring_binary_cubic() {
    let out = realid(&["waring", "--d", "3", "--n", "1", "--r", "2", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0));
    let c = &json_of(&out)["classification"];
    assert_eq!(c["total"], 1);
    assert_eq!(c["identifiable_over_C"], true);
    assert_eq!(c["identifiable_over_R"], true);
}

#[test]
fn waring_inadmissible_exits_1() {
    let out = realid(&["waring", "--d", "4", "--n", "2", "--r", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Alexander–Hirschowitz exception"));
    let out = realid(&["waring", "--d", "3", "--n", "2", "--r", "3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn elliptic_plane_x2() {
    let out = realid(&["elliptic", "plane", "--coeffs", "0,0,1,0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["signature"], serde_json::json!([2, 2]));
}

#[test]
fn elliptic_tangent_plane() {
    let out = realid(&["elliptic", "plane", "--coeffs", "0,0,1,-1"]);
    assert_eq!(out.status.code(), Some(0));
    let t = json_of(&out)["tangent"].clone();
    let re: Vec<f64> = t.as_array().unwrap().iter().map(|z| z[0].as_f64().unwrap()).collect();
    for (a, b) in re.iter().zip([1.0, 1.0, -1.0, -1.0]) {
        assert!((a - b).abs() < 1e-6, "{t}");
    }
}

#[test]
fn elliptic_point_s4() {
    let out = realid(&["elliptic", "point", "--construct", "s4", "--perturb", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["classification"]["type"], "s4");
    assert_eq!(v["classification"]["lines"].as_array().unwrap().len(), 2);
    assert!(v["perturbations"].as_array().unwrap().iter().all(|p| p["type"] == "s4"));
}

#[test]
fn elliptic_point_by_coordinates() {
    let out = realid(&["elliptic", "point", "--coords", "0.3,-0.2,0.5,0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let t = json_of(&out)["classification"]["type"].as_str().unwrap().to_string();
    assert!(["s1", "s2", "s3", "s4"].contains(&t.as_str()));
    let out = realid(&["elliptic", "point", "--coords", "0,1,0,-1"]);
    assert_eq!(json_of(&out)["classification"]["type"], "degenerate");
}

#[test]
fn elliptic_pencil_scan() {
    let out = realid(&["elliptic", "pencil-scan", "--from", "-2", "--to", "2", "--steps", "41"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let records = v["records"].as_array().unwrap();
    assert_eq!(records.len(), 41);
    for r in records {
        let k = r["k"].as_f64().unwrap();
        if (k.abs() - 1.0).abs() < 1e-9 {
            assert!(r.get("tangent").is_some(), "{r}");
        } else if k.abs() < 1.0 {
            assert_eq!(r["signature"], serde_json::json!([2, 2]), "{r}");
        } else {
            assert_eq!(r["signature"], serde_json::json!([0, 4]), "{r}");
        }
    }
    assert_eq!(v["pencil"]["smooth"], true);
}

#[test]
fn sequential_runs_are_byte_identical() {
    let args = ["segre", "section", "--dims", "2,4", "--seed", "3", "--threads", "1"];
    let (a, b) = (realid(&args), realid(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn reports_go_to_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_realid"))
        .args(["segre", "profile", "--dims", "1,1", "--quiet"])
        .env(realid::OUTPUT_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("segre-profile-0.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["D"], 2);

    let explicit = dir.path().join("nested/report.json");
    let out = realid(&["segre", "profile", "--dims", "2,2", "-q", "--output", explicit.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&explicit).unwrap()).unwrap();
    assert_eq!(v["parity"], "odd");
    assert_eq!(v["config"]["output_path"], explicit.to_str().unwrap());
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(realid(&["segre", "profile", "--dims", "1,2,3"]).status.code(), Some(1));
    assert_eq!(realid(&["elliptic", "plane", "--coeffs", "1,2"]).status.code(), Some(1));
    assert_eq!(realid(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(realid(&["--help"]).status.code(), Some(0));
}

#[test]
fn shipped_fixture_matches_the_built_in_start() {
    let rows = realid::load_fixture(&workspace_root().join("fixtures/deg7_rank12.json")).unwrap();
    assert_eq!(rows, realid_core::waring::deg7_fixture_rows());
}
