//! Small dense LPs over functionals on R^{n+1}, solved with `microlp`.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DVector;

/// Maximises `t` subject to `row · φ ≥ t` for every row, `eq · φ = 0` for
/// every equality, and `|φ_k| ≤ 1`. Returns `(φ, t)`.
pub(crate) fn max_min_margin(
    dim: usize,
    rows: &[DVector<f64>],
    eqs: &[DVector<f64>],
) -> Option<(DVector<f64>, f64)> {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let phi: Vec<_> = (0..dim).map(|_| problem.add_var(0.0, (-1.0, 1.0))).collect();
    let bound = rows.iter().map(|r| r.abs().sum()).fold(1.0, f64::max);
    let t = problem.add_var(1.0, (-bound, bound));
    for row in rows {
        let mut expr: Vec<_> = phi.iter().zip(row.iter()).map(|(v, c)| (*v, *c)).collect();
        expr.push((t, -1.0));
        problem.add_constraint(expr.as_slice(), ComparisonOp::Ge, 0.0);
    }
    for eq in eqs {
        let expr: Vec<_> = phi.iter().zip(eq.iter()).map(|(v, c)| (*v, *c)).collect();
        problem.add_constraint(expr.as_slice(), ComparisonOp::Eq, 0.0);
    }
    let solution = problem.solve().ok()?.into_solution().ok()?;
    let values = DVector::from_iterator(dim, phi.iter().map(|v| solution.var_value(*v)));
    Some((values, solution.var_value(t)))
}

/// Finds `φ` with `row · φ ≥ 0` for all rows, `eq · φ = 0`, and `norm · φ = 1`.
pub(crate) fn feasible_functional(
    dim: usize,
    rows: &[DVector<f64>],
    eqs: &[DVector<f64>],
    norm: &DVector<f64>,
    slack: f64,
) -> Option<DVector<f64>> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let phi: Vec<_> = (0..dim)
        .map(|_| problem.add_var(0.0, (-1e6, 1e6)))
        .collect();
    let lin = |v: &DVector<f64>| -> Vec<_> { phi.iter().zip(v.iter()).map(|(a, c)| (*a, *c)).collect() };
    for row in rows {
        problem.add_constraint(lin(row).as_slice(), ComparisonOp::Ge, -slack);
    }
    for eq in eqs {
        problem.add_constraint(lin(eq).as_slice(), ComparisonOp::Eq, 0.0);
    }
    problem.add_constraint(lin(norm).as_slice(), ComparisonOp::Eq, 1.0);
    let solution = problem.solve().ok()?.into_solution().ok()?;
    Some(DVector::from_iterator(
        dim,
        phi.iter().map(|v| solution.var_value(*v)),
    ))
}

/// Largest elliptic ball inside the polyhedral cone `{x : h_i · x ≥ 0}`.
///
/// Kelley cutting planes on `max t s.t. ĥ_i · x ≥ t, ‖x‖ ≤ 1`; returns the
/// centre and the radius `asin(t)`.
pub(crate) fn polyhedral_inradius(halfspaces: &[DVector<f64>]) -> Option<(DVector<f64>, f64)> {
    let dim = halfspaces.first()?.len();
    let unit: Vec<DVector<f64>> = halfspaces.iter().map(|h| h / h.norm()).collect();
    let mut cuts: Vec<DVector<f64>> = Vec::new();
    for k in 0..dim {
        let mut e = DVector::zeros(dim);
        e[k] = 1.0;
        cuts.push(e.clone());
        cuts.push(-e);
    }
    let mut best: Option<(DVector<f64>, f64)> = None;
    for _ in 0..400 {
        let mut problem = Problem::new(OptimizationDirection::Maximize);
        let x: Vec<_> = (0..dim).map(|_| problem.add_var(0.0, (-2.0, 2.0))).collect();
        let t = problem.add_var(1.0, (-2.0, 2.0));
        for h in &unit {
            let mut expr: Vec<_> = x.iter().zip(h.iter()).map(|(v, c)| (*v, *c)).collect();
            expr.push((t, -1.0));
            problem.add_constraint(expr.as_slice(), ComparisonOp::Ge, 0.0);
        }
        for c in &cuts {
            let expr: Vec<_> = x.iter().zip(c.iter()).map(|(v, c)| (*v, *c)).collect();
            problem.add_constraint(expr.as_slice(), ComparisonOp::Le, 1.0);
        }
        let solution = problem.solve().ok()?.into_solution().ok()?;
        let xv = DVector::from_iterator(dim, x.iter().map(|v| solution.var_value(*v)));
        let norm = xv.norm();
        if norm < 1e-300 {
            return None;
        }
        let center = &xv / norm;
        let value = unit.iter().map(|h| h.dot(&center)).fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|b| value > b.1) {
            best = Some((center.clone(), value));
        }
        let upper = solution.var_value(t);
        if norm <= 1.0 + 1e-10 || upper - value < 1e-10 {
            break;
        }
        cuts.push(center);
    }
    best.map(|(c, t)| (c, t.clamp(-1.0, 1.0).asin()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_on_orthant_generators() {
        let rows: Vec<DVector<f64>> = (0..3)
            .map(|k| {
                let mut e = DVector::zeros(3);
                e[k] = 1.0;
                e
            })
            .collect();
        let (phi, t) = max_min_margin(3, &rows, &[]).unwrap();
        assert!((t - 1.0).abs() < 1e-9);
        assert!((phi - DVector::from_element(3, 1.0)).norm() < 1e-9);
    }

    #[test]
    fn orthant_inradius() {
        let rows: Vec<DVector<f64>> = (0..3)
            .map(|k| {
                let mut e = DVector::zeros(3);
                e[k] = 1.0;
                e
            })
            .collect();
        let (c, r) = polyhedral_inradius(&rows).unwrap();
        // The centre is the diagonal; radius asin(1/√3).
        assert!((r - (1.0 / 3f64.sqrt()).asin()).abs() < 1e-6, "{r}");
        assert!((c - DVector::from_element(3, 1.0 / 3f64.sqrt())).norm() < 1e-4);
    }
}
