mod common;

use common::{code, run, spec_path};
use nalgebra::DMatrix;
use projconvex::coxeter::{cartan_from_orders, standard_simplex, uniform_orders, DeformationParams};
use projconvex::invariants::{c_of_s, gluing_residuals};
use projconvex_cli::commands::{cmd_sweep, grid, sweep_csv, SWEEP_HEADER};
use projconvex_cli::spec::OrbifoldSpec;
use projconvex_cli::CliError;

/// Common `t` of four equal ends solving the σ-product equation, by bisection.
fn equal_end_t(s: f64) -> f64 {
    let residual = |log_t: f64| {
        let t = log_t.exp();
        gluing_residuals(&[(3, 3, 3); 4], &[s, t, s, t, s, t, s, t])[12]
    };
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

#[test]
fn s_sweep_on_the_c_curve_is_feasible() {
    let spec = OrbifoldSpec::load(&spec_path("doubled_tetrahedron.json")).unwrap();
    let rows = cmd_sweep(&spec, "s", (0.8, 1.2), 9, false).unwrap();
    assert_eq!(rows.len(), 9);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.index, i);
        assert_eq!(row.feasibility, "Feasible", "s = {}", row.value);
        assert!(row.residual < 1e-9, "s = {}: {}", row.value, row.residual);
        let t = equal_end_t(row.value);
        assert!((t.powi(4) / c_of_s(row.value) - 1.0).abs() < 1e-9);
        let expected = if (row.value - 1.0).abs() < 1e-12 { "StrictlyConvexSoFar" } else { "unrealized" };
        assert_eq!(row.verdict, expected);
    }
}

#[test]
fn lambda_sweep_on_the_triangle_is_properly_convex() {
    let spec = OrbifoldSpec::load(&spec_path("triangle_333.json")).unwrap();
    let rows = cmd_sweep(&spec, "lambda", (0.5, 2.0), 7, false).unwrap();
    assert_eq!(rows.len(), 7);
    for row in &rows {
        assert_eq!(row.verdict, "ProperlyConvex", "λ = {}", row.value);
        assert_eq!(row.feasibility, "Feasible");
        assert!(row.max_chord.unwrap() < std::f64::consts::PI);
        // Vinberg: a Cartan matrix of negative type has a properly convex
        // Tits cone; away from λ = 1 the cyclic product moves off the affine
        // value and the determinant turns negative.
        let sys = cartan_from_orders(
            &standard_simplex(2),
            &uniform_orders(3, 3),
            &DeformationParams::uniform().with(0, 1, row.value),
        )
        .unwrap();
        let cartan: &DMatrix<f64> = sys.cartan();
        if (row.value - 1.0).abs() > 1e-6 {
            assert!(cartan.determinant() < 0.0, "λ = {}", row.value);
        }
    }
}

#[test]
fn kv_column_is_positive_when_enabled() {
    let mut spec = OrbifoldSpec::load(&spec_path("triangle_444.json")).unwrap();
    spec.options.depth = 4;
    spec.options.n_samples = 50_000;
    let rows = cmd_sweep(&spec, "lambda:1-2", (0.8, 1.25), 2, true).unwrap();
    assert!(rows.iter().all(|r| r.min_hessian_eig.unwrap() > 0.0));
}

#[test]
fn unknown_parameters_are_rejected() {
    let spec = OrbifoldSpec::load(&spec_path("triangle_333.json")).unwrap();
    for name in ["s", "t1", "mu", "lambda:0-7", "lambda:1-1"] {
        assert!(matches!(cmd_sweep(&spec, name, (0.0, 1.0), 3, false), Err(CliError::UnknownParameter(_))), "{name}");
    }
    let out = run(&["sweep", spec_path("triangle_333.json").to_str().unwrap(), "--param", "mu", "--range", "0:1", "--steps", "2", "--out", "/dev/null"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn zero_steps_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let spec = spec_path("doubled_tetrahedron.json");
    let out = run(&["sweep", spec.to_str().unwrap(), "--param", "s", "--range", "0.8:1.2", "--steps", "0", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), format!("{SWEEP_HEADER}\n"));
    assert!(dir.path().join("sweep.svg").exists());
}

#[test]
fn grid_endpoints() {
    assert_eq!(grid((0.5, 2.0), 4), vec![0.5, 1.0, 1.5, 2.0]);
    assert_eq!(grid((3.0, 4.0), 1), vec![3.0]);
    assert!(grid((0.0, 1.0), 0).is_empty());
}

#[test]
fn rows_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_path("triangle_333.json");
    let mut outputs = vec![];
    for threads in ["1", "4"] {
        let csv = dir.path().join(format!("sweep{threads}.csv"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_projconvex"))
            .env("PROJCONVEX_THREADS", threads)
            .args(["sweep", spec.to_str().unwrap(), "--param", "lambda:0-2", "--range", "0.6:1.6", "--steps", "5", "--out", csv.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(status.status.success());
        outputs.push(std::fs::read_to_string(csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].lines().count(), 6);
}

#[test]
fn csv_rows_keep_grid_order() {
    let spec = OrbifoldSpec::load(&spec_path("doubled_tetrahedron.json")).unwrap();
    let rows = cmd_sweep(&spec, "s", (1.1, 1.3), 3, false).unwrap();
    let csv = sweep_csv(&rows);
    let indices: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(indices, ["0", "1", "2"]);
}
