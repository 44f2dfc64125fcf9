mod common;

use common::{code, run, spec_path, write_spec};
use projconvex::devmap::ComplexJson;
use projconvex_cli::commands::{cmd_develop, report_from_json};
use projconvex_cli::report::Report;
use projconvex_cli::spec::OrbifoldSpec;

fn read_report(dir: &std::path::Path) -> Report {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn seeds_only_obj_has_two_tetrahedra() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_path("doubled_tetrahedron.json");
    let out = run(&["develop", spec.to_str().unwrap(), "--depth", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let obj = std::fs::read_to_string(dir.path().join("complex.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 8);
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 8);
}

#[test]
fn hyperbolic_point_at_depth_five_passes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_path("doubled_tetrahedron.json");
    let out = run(&["develop", spec.to_str().unwrap(), "--depth", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("StrictlyConvexSoFar"));
    let report = read_report(dir.path());
    let convexity = report.checks.iter().find(|c| c.name == "convexity").unwrap();
    assert_eq!(convexity.detail.as_deref(), Some("StrictlyConvexSoFar"));
    assert!(report.checks.iter().all(|c| c.pass && c.measured <= c.tolerance));
}

#[test]
fn report_survives_json_round_trip() {
    for (name, depth) in [("doubled_tetrahedron.json", 3), ("triangle_333.json", 6)] {
        let dir = tempfile::tempdir().unwrap();
        let spec = OrbifoldSpec::load(&spec_path(name)).unwrap();
        let mut written = cmd_develop(&spec, Some(depth), dir.path()).unwrap();
        let json: ComplexJson =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("complex.json")).unwrap()).unwrap();
        let mut reloaded = report_from_json(&spec, &json).unwrap();
        let mut from_disk = read_report(dir.path());
        for r in [&mut written, &mut reloaded, &mut from_disk] {
            r.timings_ms.clear();
        }
        assert_eq!(written, reloaded, "{name}");
        assert_eq!(written, from_disk, "{name}");
    }
}

#[test]
fn missing_orders_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "bad.json", r#"{"name": "x", "kind": "doubled_reflection"}"#);
    let out = run(&["develop", spec.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("`orders`"));
}

#[test]
fn syntax_errors_report_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "bad.json", "{\n  \"name\": \"x\",\n  \"kind\": reflection\n}");
    let out = run(&["develop", spec.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn out_of_range_lambda_pair_is_rejected() {
    let text = std::fs::read_to_string(spec_path("triangle_333.json"))
        .unwrap()
        .replace("\"pair\": [0, 1]", "\"pair\": [0, 5]");
    let err = OrbifoldSpec::parse(&text).unwrap_err();
    assert!(err.to_string().contains("parameters.lambdas"));
}

#[test]
fn unrealized_s_fails_checks() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(spec_path("doubled_tetrahedron.json"))
        .unwrap()
        .replace("\"s\": 1.0", "\"s\": 1.1");
    let spec = write_spec(dir.path(), "s.json", &text);
    let out = run(&["develop", spec.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(read_report(dir.path()).checks[0].detail.as_deref().unwrap().starts_with("unrealized"));
}

#[test]
fn explosion_guard_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(spec_path("doubled_tetrahedron.json"))
        .unwrap()
        .replace("\"eps0\": 0.1", "\"eps0\": 0.1, \"cap\": 20");
    let spec = write_spec(dir.path(), "cap.json", &text);
    let out = run(&["develop", spec.to_str().unwrap(), "--depth", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn tiling_obj_has_one_face_per_tile() {
    let dir = tempfile::tempdir().unwrap();
    let spec = OrbifoldSpec::load(&spec_path("triangle_333.json")).unwrap();
    let report = cmd_develop(&spec, Some(4), dir.path()).unwrap();
    let tiles = report.info["tiles"].as_u64().unwrap() as usize;
    let obj = std::fs::read_to_string(dir.path().join("complex.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), tiles);
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 3 * tiles);
}

#[test]
fn tetrahedral_tiling_obj_has_four_faces_per_tile() {
    let dir = tempfile::tempdir().unwrap();
    let spec = OrbifoldSpec::load(&spec_path("tetrahedron_reflection.json")).unwrap();
    let report = cmd_develop(&spec, Some(2), dir.path()).unwrap();
    let tiles = report.info["tiles"].as_u64().unwrap() as usize;
    let obj = std::fs::read_to_string(dir.path().join("complex.obj")).unwrap();
    let faces: Vec<&str> = obj.lines().filter(|l| l.starts_with("f ")).collect();
    assert_eq!(faces.len(), 4 * tiles);
    assert!(faces.iter().all(|f| f.split_whitespace().count() == 4));
}

#[test]
fn coxeter_check_and_ends() {
    let spec = spec_path("tetrahedron_reflection.json");
    assert_eq!(code(&run(&["coxeter-check", spec.to_str().unwrap(), "--depth", "2"])), 0);
    let spec = spec_path("doubled_tetrahedron.json");
    let out = run(&["classify-ends", spec.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let ends: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ends = ends.as_array().unwrap();
    assert_eq!(ends.len(), 4);
    assert!(ends.iter().all(|e| e["class"] == "Horospherical"));
}

#[test]
fn hilbert_dist_on_the_disk_is_twice_klein() {
    let out = run(&["hilbert-dist", "--p", "0,0", "--q", "0.5,0"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // Klein distance from the center to r is atanh(r).
    let expected = 2.0 * 0.5f64.atanh();
    assert!((v["distance"].as_f64().unwrap() - expected).abs() < 1e-9);
}

#[test]
fn kv_on_orthant_matches_product() {
    let out = run(&["kv", "--cone", "orthant", "--dim", "3", "--point", "1,2,0.5", "--samples", "200000"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 0.03);
    assert!(v["min_eigenvalue"].as_f64().unwrap() > 0.0);
}
