use crate::CliError;
use nalgebra::{DMatrix, DVector};
use projconvex::convex::complement_basis;
use projconvex::devmap::ComplexJson;
use std::fmt::Write as _;
use std::path::Path;

/// SVG canvas size in user units.
pub const CANVAS: f64 = 800.0;
const MARGIN: f64 = 20.0;

/// Affine chart `x ↦ B^T x / φ(x)` with `B` an orthonormal basis of `φ^⊥`.
#[derive(Debug, Clone)]
pub struct ChartProjection {
    phi: DVector<f64>,
    basis: DMatrix<f64>,
}

impl ChartProjection {
    /// The chart stored in the complex.
    pub fn new(json: &ComplexJson) -> Result<Self, CliError> {
        Self::with_functional(json, DVector::from_column_slice(&json.chart))
    }

    /// `auto` for the stored chart, `e<k>` for the `k`-th coordinate.
    pub fn parse(json: &ComplexJson, chart: &str) -> Result<Self, CliError> {
        if chart == "auto" {
            return Self::new(json);
        }
        let size = json.dim + 1;
        let k: usize = chart
            .strip_prefix('e')
            .and_then(|k| k.parse().ok())
            .filter(|&k| k < size)
            .ok_or_else(|| CliError::BadChart(format!("{chart:?} is not auto or e0..e{}", size - 1)))?;
        Self::with_functional(json, DVector::from_fn(size, |i, _| if i == k { 1.0 } else { 0.0 }))
    }

    /// Requires `φ` to have one strict sign on every vertex.
    pub fn with_functional(json: &ComplexJson, phi: DVector<f64>) -> Result<Self, CliError> {
        let size = json.dim + 1;
        if phi.len() != size || phi.norm() == 0.0 {
            return Err(CliError::BadChart(format!("chart needs {size} nonzero coordinates")));
        }
        let values: Vec<f64> = json
            .simplices
            .iter()
            .flat_map(|s| s.vertices.iter())
            .map(|v| {
                if v.len() != size {
                    return f64::NAN;
                }
                phi.dot(&DVector::from_column_slice(v)) / v.iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .collect();
        let phi = if values.iter().all(|&x| x > 1e-12) {
            phi
        } else if values.iter().all(|&x| x < -1e-12) {
            -phi
        } else {
            return Err(CliError::BadChart("chart hyperplane meets the complex".into()));
        };
        let basis = complement_basis(&phi);
        Ok(Self { phi, basis })
    }

    /// Affine coordinates of `x` (length `dim`).
    pub fn affine(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * (x / self.phi.dot(x))
    }
}

/// Indices ordering the points counterclockwise around their centroid.
pub fn order_polygon(points: &[[f64; 2]]) -> Vec<usize> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        let ta = (points[a][1] - cy).atan2(points[a][0] - cx);
        let tb = (points[b][1] - cy).atan2(points[b][0] - cx);
        ta.total_cmp(&tb)
    });
    idx
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counterclockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Outline of every simplex in the plane of the first two chart coordinates.
pub fn outlines(json: &ComplexJson, proj: &ChartProjection) -> Vec<Vec<[f64; 2]>> {
    json.simplices
        .iter()
        .map(|s| {
            let pts: Vec<[f64; 2]> = s
                .vertices
                .iter()
                .map(|v| {
                    let y = proj.affine(&DVector::from_column_slice(v));
                    [y[0], y[1]]
                })
                .collect();
            convex_hull_2d(&pts)
        })
        .collect()
}

/// SVG with one outlined polygon per simplex, scaled to the canvas.
pub fn render_svg(json: &ComplexJson, chart: &str) -> Result<String, CliError> {
    let proj = ChartProjection::parse(json, chart)?;
    let polys = outlines(json, &proj);
    let all = polys.iter().flatten();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in all {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let scale = (CANVAS - 2.0 * MARGIN) / span;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS}\" height=\"{CANVAS}\" viewBox=\"0 0 {CANVAS} {CANVAS}\">\n"
    );
    for (i, poly) in polys.iter().enumerate() {
        let pts: Vec<String> = poly
            .iter()
            .map(|p| format!("{:.6},{:.6}", MARGIN + (p[0] - lo[0]) * scale, CANVAS - MARGIN - (p[1] - lo[1]) * scale))
            .collect();
        let _ = writeln!(
            out,
            "<polygon data-simplex=\"{i}\" points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.5\"/>",
            pts.join(" ")
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn load_complex(path: &Path) -> Result<ComplexJson, CliError> {
    let text = std::fs::read_to_string(path).map_err(|_| CliError::FileNotFound(path.display().to_string()))?;
    serde_json::from_str(&text).map_err(|e| CliError::SpecParse(e.to_string()))
}

/// `render`: writes the SVG of the complex at `complex` to `out`.
pub fn cmd_render(complex: &Path, chart: &str, out: &Path) -> Result<(), CliError> {
    let svg = render_svg(&load_complex(complex)?, chart)?;
    std::fs::write(out, svg)?;
    Ok(())
}

/// Line plot of `log10(max(residual, 1e-17))` against the swept value.
pub fn residual_plot(points: &[(f64, f64)], label: &str) -> String {
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS}\" height=\"{}\" viewBox=\"0 0 {CANVAS} {}\">\n",
        CANVAS / 2.0,
        CANVAS / 2.0
    );
    let h = CANVAS / 2.0;
    let ys: Vec<f64> = points.iter().map(|p| p.1.max(1e-17).log10()).collect();
    let (x0, x1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let sx = (CANVAS - 4.0 * MARGIN) / (x1 - x0).max(1e-12);
    let sy = (h - 4.0 * MARGIN) / (y1 - y0).max(1.0);
    let _ = writeln!(
        out,
        "<text x=\"{MARGIN}\" y=\"{MARGIN}\" font-size=\"12\">log10 residual vs {label}</text>"
    );
    let _ = writeln!(
        out,
        "<line x1=\"{a}\" y1=\"{b}\" x2=\"{c}\" y2=\"{b}\" stroke=\"gray\"/>",
        a = 2.0 * MARGIN,
        b = h - 2.0 * MARGIN,
        c = CANVAS - 2.0 * MARGIN
    );
    if !points.is_empty() {
        let pts: Vec<String> = points
            .iter()
            .zip(&ys)
            .map(|(p, y)| format!("{:.6},{:.6}", 2.0 * MARGIN + (p.0 - x0) * sx, h - 2.0 * MARGIN - (y - y0) * sy))
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"black\"/>",
            pts.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_drops_interior_and_collinear_points() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.0], [1.0, 1.0], [0.0, 1.0], [0.4, 0.6]];
        let hull = convex_hull_2d(&pts);
        assert_eq!(hull, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
    }

    #[test]
    fn polygon_order_is_counterclockwise() {
        let pts = [[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]];
        assert_eq!(order_polygon(&pts), vec![1, 2, 0, 3]);
    }

    #[test]
    fn residual_plot_is_valid_for_empty_input() {
        let svg = residual_plot(&[], "s");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("polyline"));
    }
}
