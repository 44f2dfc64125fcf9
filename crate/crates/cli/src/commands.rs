use crate::render::{order_polygon, ChartProjection};
use crate::report::{Check, Report};
use crate::spec::{OrbifoldSpec, SpecKind};
use crate::CliError;
use nalgebra::DVector;
use projconvex::convex::{Cone, ConvexBody, ConvexityVerdict};
use projconvex::coxeter::{fundamental_orbit, relation_check, CoxeterSystem, OrbitComplex};
use projconvex::devmap::{
    classify_end, confinement_check, convexity_verdict, develop, end_descriptors, reflection_lambdas,
    relator_residuals, ComplexJson, ConvexityClass, DevelopedComplex, GluingData, SimplexJson,
};
use projconvex::hilbert::HilbertCtx;
use projconvex::invariants::{c_of_s, gluing_residuals, solve_doubled_tetrahedron_constraints, EndOrbifoldParams, Feasibility};
use projconvex::kv::KvContext;
use projconvex::projective::ProjPoint;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Tolerance for relator and dihedral-relation residuals.
pub const RELATION_TOL: f64 = 1e-8;
/// Tolerance for supporting half-space violations.
pub const CONFINEMENT_TOL: f64 = 1e-8;

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn unrealized_check(spec: &OrbifoldSpec) -> Check {
    Check::at_most("realized", (spec.s() - 1.0).abs(), 1e-12)
        .with_detail("unrealized: only s = 1 has a reflection realisation")
}

fn relator_check(data: &GluingData) -> Check {
    let worst = relator_residuals(data).iter().map(|r| r.residual).fold(0.0, f64::max);
    Check::at_most("relators", worst, RELATION_TOL)
}

fn relation_checks(sys: &CoxeterSystem) -> Vec<Check> {
    let rel = relation_check(sys);
    vec![
        Check::at_most("relations", rel.max_residual, RELATION_TOL),
        Check::at_most("relations_minimal", if rel.all_minimal { 0.0 } else { 1.0 }, 0.0),
    ]
}

fn chord_check(chord: f64, eps0: f64) -> Check {
    Check::at_most("max_chord", chord, PI - eps0)
}

/// Checks on a developed tetrahedral complex.
pub fn complex_checks(complex: &DevelopedComplex, eps0: f64) -> Vec<Check> {
    let conf = confinement_check(complex, eps0);
    let conv = convexity_verdict(complex);
    let defects = (conv.chord_exits + conv.collinear_boundary_triples) as f64;
    vec![
        Check::at_most("confinement", conf.max_violation, CONFINEMENT_TOL)
            .with_detail(format!("{} supporting half-spaces", conf.halfspaces.len())),
        chord_check(conf.max_chord, eps0),
        Check {
            name: "convexity".into(),
            pass: conv.verdict == ConvexityClass::StrictlyConvexSoFar,
            measured: defects,
            tolerance: 0.0,
            detail: Some(format!("{:?}", conv.verdict)),
        },
    ]
}

/// Checks on the convex hull of a finite tiling.
pub fn tiling_checks(hull: &ConvexBody, eps0: f64) -> Vec<Check> {
    let verdict = hull.properly_convex_check();
    vec![
        Check {
            name: "proper_convexity".into(),
            pass: verdict == ConvexityVerdict::ProperlyConvex,
            measured: if verdict == ConvexityVerdict::ProperlyConvex { 0.0 } else { 1.0 },
            tolerance: 0.0,
            detail: Some(format!("{verdict:?}")),
        },
        chord_check(hull.max_chord_length(), eps0),
    ]
}

fn tiling_json(orbit: &OrbitComplex, hull: &ConvexBody) -> ComplexJson {
    ComplexJson {
        dim: hull.dim(),
        chart: hull.chart().iter().copied().collect(),
        simplices: orbit
            .elements
            .iter()
            .zip(orbit.tiles())
            .map(|(e, tile)| SimplexJson {
                simplex: 0,
                depth: e.depth,
                word: e.word.iter().map(|i| format!("r{i}")).collect::<Vec<_>>().join(" "),
                vertices: tile.iter().map(|v| v.iter().copied().collect()).collect(),
            })
            .collect(),
        holonomy: vec![],
        body: Some(hull.to_json()),
    }
}

fn tiling_hull(json: &ComplexJson) -> Result<ConvexBody, CliError> {
    let points: Vec<DVector<f64>> = json
        .simplices
        .iter()
        .flat_map(|s| s.vertices.iter().map(|v| DVector::from_column_slice(v)))
        .collect();
    Ok(ConvexBody::hull_of(&dedup_points(&points), 0)?)
}

fn dedup_points(points: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut seen = std::collections::HashSet::new();
    points
        .iter()
        .map(|v| v / v.norm())
        .filter(|u| seen.insert(u.iter().map(|x| (x * 1e9).round() as i64).collect::<Vec<_>>()))
        .collect()
}

/// OBJ of a tiling: one polygon per tile in dimension 2, one polygon per
/// tile facet in dimension 3.
fn tiling_obj(json: &ComplexJson, base: &ConvexBody) -> Result<String, CliError> {
    let proj = ChartProjection::new(json)?;
    let mut out = String::from("# developed tiling\n");
    let mut faces: Vec<Vec<usize>> = Vec::new();
    let mut count = 0;
    let base_vertices = base.vertices();
    for s in &json.simplices {
        let pts: Vec<DVector<f64>> = s
            .vertices
            .iter()
            .map(|v| proj.affine(&DVector::from_column_slice(v)))
            .collect();
        for p in &pts {
            let z = if p.len() > 2 { p[2] } else { 0.0 };
            let _ = writeln!(out, "v {:.12} {:.12} {:.12}", p[0], p[1], z);
        }
        if json.dim == 2 {
            let plane: Vec<[f64; 2]> = pts.iter().map(|p| [p[0], p[1]]).collect();
            faces.push(order_polygon(&plane).into_iter().map(|k| count + k).collect());
        } else {
            for h in base.halfspaces() {
                let on: Vec<usize> = (0..base_vertices.len())
                    .filter(|&k| h.dot(&base_vertices[k]).abs() <= 1e-9 * base_vertices[k].norm())
                    .collect();
                let plane = facet_plane(&on.iter().map(|&k| pts[k].clone()).collect::<Vec<_>>());
                faces.push(order_polygon(&plane).into_iter().map(|k| count + on[k]).collect());
            }
        }
        count += pts.len();
    }
    for f in faces {
        let idx: Vec<String> = f.iter().map(|k| (k + 1).to_string()).collect();
        let _ = writeln!(out, "f {}", idx.join(" "));
    }
    Ok(out)
}

/// Coordinates of coplanar 3D points in an orthonormal frame of their plane.
fn facet_plane(points: &[DVector<f64>]) -> Vec<[f64; 2]> {
    let n = points.len() as f64;
    let c = points.iter().fold(DVector::zeros(3), |acc, p| acc + p) / n;
    let e1 = (&points[0] - &c).normalize();
    let normal = points
        .iter()
        .map(|p| e1.cross(&(p - &c)))
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("nonempty facet")
        .normalize();
    let e2 = normal.cross(&e1);
    points.iter().map(|p| [(p - &c).dot(&e1), (p - &c).dot(&e2)]).collect()
}

/// Report of a developed complex as written to disk; recomputing it from
/// the reloaded JSON gives the same checks.
pub fn report_from_json(spec: &OrbifoldSpec, json: &ComplexJson) -> Result<Report, CliError> {
    let mut report = Report::new(&spec.name);
    let options = &spec.options;
    match spec.kind {
        SpecKind::ReflectionPolytope => {
            let sys = spec.coxeter_system()?;
            report.checks.extend(relation_checks(&sys));
            let hull = tiling_hull(json)?;
            report.checks.extend(tiling_checks(&hull, options.eps0));
            report.info.insert("tiles".into(), json.simplices.len().into());
        }
        SpecKind::DoubledReflection | SpecKind::Triangulated => {
            report.checks.push(relator_check(&spec.gluing_data()?));
            let complex = DevelopedComplex::from_json(json)?;
            report.checks.extend(complex_checks(&complex, options.eps0));
            report.info.insert("simplices".into(), complex.placed.len().into());
            report.info.insert("holonomy_generators".into(), complex.holonomy.len().into());
        }
    }
    let depth = json.simplices.iter().map(|s| s.depth).max().unwrap_or(0);
    report.info.insert("depth".into(), depth.into());
    Ok(report)
}

/// `develop`: writes `complex.obj`, `complex.json` and `report.json` into
/// `out`, returning the report.
pub fn cmd_develop(spec: &OrbifoldSpec, depth: Option<usize>, out: &Path) -> Result<Report, CliError> {
    std::fs::create_dir_all(out)?;
    let depth = depth.unwrap_or(spec.options.depth);
    let cap = spec.options.cap;
    let start = Instant::now();
    if !spec.realized() {
        let mut report = Report::new(&spec.name);
        report.checks.push(unrealized_check(spec));
        write_report(&report, out)?;
        return Ok(report);
    }
    let (json, obj) = match spec.kind {
        SpecKind::ReflectionPolytope => {
            let sys = spec.coxeter_system()?;
            let orbit = fundamental_orbit(&sys, depth, cap)?;
            let hull = orbit.hull(0)?;
            let json = tiling_json(&orbit, &hull);
            let obj = tiling_obj(&json, sys.polytope())?;
            (json, obj)
        }
        SpecKind::DoubledReflection | SpecKind::Triangulated => {
            let complex = develop(&spec.gluing_data()?, depth, cap)?;
            (complex.to_json(), complex.to_obj())
        }
    };
    let develop_ms = ms(start);
    std::fs::write(out.join("complex.obj"), obj)?;
    std::fs::write(out.join("complex.json"), serde_json::to_string_pretty(&json).expect("serialisable"))?;
    let start = Instant::now();
    let mut report = report_from_json(spec, &json)?;
    report.timings_ms.insert("develop".into(), develop_ms);
    report.timings_ms.insert("verify".into(), ms(start));
    write_report(&report, out)?;
    Ok(report)
}

fn write_report(report: &Report, out: &Path) -> Result<(), CliError> {
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(report).expect("serialisable"))?;
    std::fs::write(out.join("report.txt"), report.to_text())?;
    Ok(())
}

/// Sweepable parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepParam {
    S,
    T(usize),
    Lambda(usize, usize),
}

impl SweepParam {
    pub fn parse(name: &str, spec: &OrbifoldSpec) -> Result<Self, CliError> {
        let unknown = || CliError::UnknownParameter(name.to_string());
        let param = match name {
            "s" => SweepParam::S,
            "t1" | "t2" | "t3" => SweepParam::T(name[1..].parse::<usize>().expect("digit") - 1),
            "lambda" => SweepParam::Lambda(0, 1),
            _ => {
                let pair = name.strip_prefix("lambda:").ok_or_else(unknown)?;
                let (i, j) = pair.split_once('-').ok_or_else(unknown)?;
                let i: usize = i.parse().map_err(|_| unknown())?;
                let j: usize = j.parse().map_err(|_| unknown())?;
                SweepParam::Lambda(i, j)
            }
        };
        let facets = spec.orders.as_ref().map_or(0, Vec::len);
        let ok = match (spec.kind, param) {
            (SpecKind::Triangulated, _) => false,
            (SpecKind::DoubledReflection, SweepParam::S | SweepParam::T(_)) => true,
            (SpecKind::ReflectionPolytope, SweepParam::S | SweepParam::T(_)) => false,
            (_, SweepParam::Lambda(i, j)) => i < facets && j < facets && i != j,
        };
        if ok {
            Ok(param)
        } else {
            Err(unknown())
        }
    }

    /// Copy of `spec` with the parameter set to `value`.
    fn apply(&self, spec: &OrbifoldSpec, value: f64) -> OrbifoldSpec {
        let mut out = spec.clone();
        let p = &mut out.parameters;
        match *self {
            SweepParam::S => p.s = Some(value),
            SweepParam::T(k) => {
                let mut t = p.t.unwrap_or([1.0; 3]);
                t[k] = value;
                p.t = Some(t);
            }
            SweepParam::Lambda(i, j) => {
                if let Some(t) = p.t.take() {
                    p.lambdas = reflection_lambdas(t)
                        .lambdas
                        .into_iter()
                        .map(|((a, b), value)| crate::spec::LambdaSpec { pair: [a, b], value })
                        .collect();
                }
                p.lambdas.retain(|l| {
                    let [a, b] = l.pair;
                    (a.min(b), a.max(b)) != (i.min(j), i.max(j))
                });
                p.lambdas.push(crate::spec::LambdaSpec { pair: [i, j], value });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub param: String,
    pub value: f64,
    pub feasibility: String,
    pub verdict: String,
    pub max_chord: Option<f64>,
    pub min_hessian_eig: Option<f64>,
    pub residual: f64,
}

fn feasibility_label(f: &Feasibility) -> String {
    match f {
        Feasibility::Feasible { .. } => "Feasible".into(),
        Feasibility::Infeasible(reason) => format!("Infeasible({reason})"),
    }
}

fn min_log_hessian_eig(body: &ConvexBody, spec: &OrbifoldSpec) -> Result<f64, CliError> {
    let cone = body.to_cone()?;
    let x = cone.interior_point();
    let ctx = KvContext::new(cone, spec.options.n_samples, spec.options.seed)?;
    Ok(ctx.kv_log_hessian(&x)?.symmetric_eigenvalues().min())
}

/// Grid `a + (b − a)·i/(k − 1)`; a single step is `a`.
pub fn grid(range: (f64, f64), steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| {
            if steps == 1 {
                range.0
            } else {
                range.0 + (range.1 - range.0) * i as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

fn sweep_row(
    spec: &OrbifoldSpec,
    name: &str,
    param: SweepParam,
    index: usize,
    value: f64,
    kv: bool,
) -> Result<SweepRow, CliError> {
    let row_spec = param.apply(spec, value);
    let depth = spec.options.depth;
    let mut row = SweepRow {
        index,
        param: name.to_string(),
        value,
        feasibility: String::new(),
        verdict: String::new(),
        max_chord: None,
        min_hessian_eig: None,
        residual: 0.0,
    };
    match row_spec.kind {
        SpecKind::ReflectionPolytope => {
            let sys = row_spec.coxeter_system()?;
            let rel = relation_check(&sys);
            row.residual = rel.max_residual;
            row.feasibility = if rel.max_residual <= RELATION_TOL { "Feasible" } else { "Infeasible(relations)" }.into();
            let hull = fundamental_orbit(&sys, depth, spec.options.cap)?.hull(0)?;
            row.verdict = format!("{:?}", hull.properly_convex_check());
            row.max_chord = Some(hull.max_chord_length());
            if kv {
                row.min_hessian_eig = Some(min_log_hessian_eig(&hull, spec)?);
            }
        }
        _ => {
            if param == SweepParam::S {
                // Ends follow the C(s) curve with equal t's.
                let s = row_spec.s();
                let c = c_of_s(s);
                let t = c.powf(0.25);
                let end = EndOrbifoldParams::s333(s, t).map_err(|e| CliError::InvalidArgument(e.to_string()))?;
                let f = solve_doubled_tetrahedron_constraints(&[end; 4])
                    .map_err(|e| CliError::InvalidArgument(e.to_string()))?;
                row.feasibility = feasibility_label(&f);
                row.residual = gluing_residuals(&[(3, 3, 3); 4], &[s, t, s, t, s, t, s, t])
                    .iter()
                    .fold(0.0, |m, r| m.max(r.abs()));
            }
            if !row_spec.realized() {
                row.verdict = "unrealized".into();
                return Ok(row);
            }
            let data = row_spec.gluing_data()?;
            let worst = relator_residuals(&data).iter().map(|r| r.residual).fold(0.0, f64::max);
            if param != SweepParam::S {
                row.residual = worst;
                row.feasibility = if worst <= RELATION_TOL { "Feasible" } else { "Infeasible(relators)" }.into();
            }
            let complex = develop(&data, depth, spec.options.cap)?;
            let conf = confinement_check(&complex, spec.options.eps0);
            row.verdict = format!("{:?}", convexity_verdict(&complex).verdict);
            row.max_chord = Some(conf.max_chord);
            if kv {
                if let Some(body) = complex.to_json().body {
                    row.min_hessian_eig = Some(min_log_hessian_eig(&ConvexBody::from_json(&body)?, spec)?);
                }
            }
        }
    }
    Ok(row)
}

/// `sweep`: one row per grid point, evaluated in parallel and ordered by index.
pub fn cmd_sweep(
    spec: &OrbifoldSpec,
    name: &str,
    range: (f64, f64),
    steps: usize,
    kv: bool,
) -> Result<Vec<SweepRow>, CliError> {
    let param = SweepParam::parse(name, spec)?;
    grid(range, steps)
        .into_par_iter()
        .enumerate()
        .map(|(i, value)| sweep_row(spec, name, param, i, value, kv))
        .collect()
}

pub const SWEEP_HEADER: &str = "index,param,value,feasibility,verdict,max_chord,min_hessian_eig,residual";

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.12e}")).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.12e},{},{},{},{},{:.6e}",
            r.index,
            r.param,
            r.value,
            r.feasibility,
            r.verdict,
            opt(r.max_chord),
            opt(r.min_hessian_eig),
            r.residual
        );
    }
    out
}

/// Whether every row passes: feasible, and convex where a verdict exists.
pub fn sweep_pass(rows: &[SweepRow]) -> bool {
    rows.iter().all(|r| {
        r.feasibility == "Feasible"
            && matches!(r.verdict.as_str(), "ProperlyConvex" | "StrictlyConvexSoFar" | "unrealized")
    })
}

/// `kv`: value, log-Hessian and its smallest eigenvalue at `point`.
pub fn cmd_kv(cone: &str, dim: usize, point: &[f64], samples: usize, seed: u64) -> Result<serde_json::Value, CliError> {
    let cone = match cone {
        "orthant" => Cone::orthant(dim),
        "lorentz" => Cone::lorentz(dim),
        other => return Err(CliError::InvalidArgument(format!("unknown cone {other:?}"))),
    };
    if point.len() != dim {
        return Err(CliError::InvalidArgument(format!("point needs {dim} coordinates")));
    }
    let x = DVector::from_column_slice(point);
    let ctx = KvContext::new(cone, samples, seed)?;
    let hess = ctx.kv_log_hessian(&x)?;
    Ok(serde_json::json!({
        "value": ctx.kv_value(&x)?,
        "log_hessian": hess.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
        "min_eigenvalue": hess.symmetric_eigenvalues().min(),
        "samples": samples,
        "seed": seed,
    }))
}

/// `coxeter-check`: dihedral relations and orbit size.
pub fn cmd_coxeter_check(spec: &OrbifoldSpec, depth: Option<usize>) -> Result<Report, CliError> {
    let start = Instant::now();
    let sys = spec.coxeter_system()?;
    let mut report = Report::new(&spec.name);
    report.checks.extend(relation_checks(&sys));
    let depth = depth.unwrap_or(spec.options.depth);
    let orbit = fundamental_orbit(&sys, depth, spec.options.cap)?;
    report.info.insert("depth".into(), depth.into());
    report.info.insert("orbit_size".into(), orbit.elements.len().into());
    report.info.insert(
        "relations".into(),
        serde_json::to_value(relation_check(&sys)).expect("serialisable"),
    );
    report.timings_ms.insert("total".into(), ms(start));
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct EndReport {
    pub vertex: Vec<f64>,
    pub class: String,
    pub lens_compatible: bool,
    pub generators: usize,
}

/// `classify-ends`: class of each end at the vertices of simplex 0.
pub fn cmd_classify_ends(spec: &OrbifoldSpec) -> Result<Vec<EndReport>, CliError> {
    if !spec.realized() {
        return Err(CliError::InvalidArgument("unrealized parameters (s ≠ 1)".into()));
    }
    end_descriptors(&spec.gluing_data()?)?
        .iter()
        .map(|end| {
            let class = classify_end(end)?;
            Ok(EndReport {
                vertex: end.vertex.coords().iter().copied().collect(),
                class: format!("{class:?}"),
                lens_compatible: class.is_lens_compatible(),
                generators: end.generators.len(),
            })
        })
        .collect()
}

/// `hilbert-dist`: Hilbert distance in a body (the unit disk by default).
pub fn cmd_hilbert_dist(body: Option<&Path>, p: &[f64], q: &[f64]) -> Result<f64, CliError> {
    let body = match body {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|_| CliError::FileNotFound(path.display().to_string()))?;
            let json = serde_json::from_str(&text).map_err(|e| CliError::SpecParse(e.to_string()))?;
            ConvexBody::from_json(&json)?
        }
        None => ConvexBody::unit_disk(256),
    };
    let size = body.dim() + 1;
    let lift = |x: &[f64]| -> Result<ProjPoint, CliError> {
        let v = match x.len() {
            n if n == size => DVector::from_column_slice(x),
            n if n + 1 == size => DVector::from_fn(size, |i, _| if i < n { x[i] } else { 1.0 }),
            _ => return Err(CliError::InvalidArgument(format!("points need {} or {size} coordinates", size - 1))),
        };
        ProjPoint::normalize(&v).map_err(|e| CliError::InvalidArgument(e.to_string()))
    };
    let ctx = HilbertCtx::new(body)?;
    Ok(ctx.hilbert_distance(&lift(p)?, &lift(q)?)?)
}
