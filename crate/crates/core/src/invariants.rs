//! Projective invariants of (p₁, p₂, p₃) triangle end orbifolds and the
//! gluing constraints of the doubled tetrahedron.
//!
//! For Goldman parameters `(s, t)` and `τ_k = 2cos(2π/p_k)`, the front
//! triangle has edge invariants `ρ_k = s² + sτ_k + 1` and vertex invariants
//! `σ = (t ρ₂, ρ₁ρ₃/t)`; the back triangle has `ρ_k/s²` and
//! `σ = (t ρ₂/s³, ρ₁ρ₃/(s³ t))`.
//!
//! Gluing convention for the doubled tetrahedron. End `u` sits at vertex `u`
//! of the tetrahedron; its three cone points are the three edges at `u`,
//! with `ρ_k` attached to the k-th of them in increasing order of the other
//! endpoint. Across every edge `{u, v}` the front invariants of the two ends
//! agree and so do the back invariants, and the front `σ₁` of the four ends
//! multiply to 1. For orders (3,3,3) this forces `s₁ = s₂ = s₃ = s₄ = s` and
//! `t₁t₂t₃t₄ = C(s) = (s² − s + 1)^{−4}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Tolerance on the equality of the four `s` parameters.
pub const S_TOL: f64 = 1e-9;
/// Tolerance on the `t`-product constraint.
pub const T_PRODUCT_TOL: f64 = 1e-6;
/// Singular values below this count as zero in rank computations.
pub const RANK_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantsError {
    #[error("order must be at least 2, got {0}")]
    InvalidOrder(u32),
    #[error("Goldman parameters must be positive (s = {s}, t = {t})")]
    NonpositiveParameter { s: f64, t: f64 },
    #[error("end {0} does not have orders (3,3,3)")]
    WrongOrders(usize),
    #[error("parameter point is not feasible: {0}")]
    NotFeasible(InfeasibleReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndOrbifoldParams {
    pub orders: (u32, u32, u32),
    pub s: f64,
    pub t: f64,
}

impl EndOrbifoldParams {
    pub fn new(orders: (u32, u32, u32), s: f64, t: f64) -> Result<Self, InvariantsError> {
        for p in [orders.0, orders.1, orders.2] {
            if p < 2 {
                return Err(InvariantsError::InvalidOrder(p));
            }
        }
        if !(s > 0.0 && t > 0.0) {
            return Err(InvariantsError::NonpositiveParameter { s, t });
        }
        Ok(Self { orders, s, t })
    }

    /// Orders (3,3,3) with the given parameters.
    pub fn s333(s: f64, t: f64) -> Result<Self, InvariantsError> {
        Self::new((3, 3, 3), s, t)
    }

    fn taus(&self) -> [f64; 3] {
        [self.orders.0, self.orders.1, self.orders.2].map(|p| 2.0 * (2.0 * PI / p as f64).cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantSet {
    pub rho: [f64; 3],
    pub sigma: [f64; 2],
}

impl InvariantSet {
    /// `ρ₁ρ₂ρ₃ − σ₁σ₂`.
    pub fn identity_residual(&self) -> f64 {
        self.rho[0] * self.rho[1] * self.rho[2] - self.sigma[0] * self.sigma[1]
    }
}

/// `τ = 2cos(2π/p)`.
pub fn tau(order: u32) -> Result<f64, InvariantsError> {
    if order < 2 {
        return Err(InvariantsError::InvalidOrder(order));
    }
    Ok(2.0 * (2.0 * PI / order as f64).cos())
}

pub fn triangle_invariants_front(p: &EndOrbifoldParams) -> InvariantSet {
    let s = p.s;
    let rho = p.taus().map(|tau| s * s + s * tau + 1.0);
    let sigma = [p.t * rho[1], rho[0] * rho[2] / p.t];
    InvariantSet { rho, sigma }
}

pub fn triangle_invariants_back(p: &EndOrbifoldParams) -> InvariantSet {
    let s = p.s;
    let front = p.taus().map(|tau| s * s + s * tau + 1.0);
    let rho = front.map(|r| r / (s * s));
    let s3 = s * s * s;
    let sigma = [p.t * front[1] / s3, front[0] * front[2] / (s3 * p.t)];
    InvariantSet { rho, sigma }
}

/// The product constant `C(s) = (s² − s + 1)^{−4}` for four (3,3,3) ends.
pub fn c_of_s(s: f64) -> f64 {
    (s * s - s + 1.0).powi(-4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfeasibleReason {
    SMismatch,
    TProduct,
}

impl std::fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InfeasibleReason::SMismatch => "s mismatch",
            InfeasibleReason::TProduct => "t-product",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Feasibility {
    Feasible { c: f64 },
    Infeasible(InfeasibleReason),
}

/// Edges of the tetrahedron on ends 0..4, in lexicographic order.
pub const TETRA_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Index (0..3) of the cone point of end `u` that corresponds to edge `{u, v}`.
pub fn cone_point_index(u: usize, v: usize) -> usize {
    (0..4).filter(|&w| w != u).position(|w| w == v).expect("v ≠ u")
}

/// Residuals of the gluing system at `x = (s₁, t₁, …, s₄, t₄)`: twelve edge
/// matching equations followed by `log ∏ σ₁`.
pub fn gluing_residuals(orders: &[(u32, u32, u32); 4], x: &[f64]) -> Vec<f64> {
    let ends: Vec<EndOrbifoldParams> = (0..4)
        .map(|u| EndOrbifoldParams {
            orders: orders[u],
            s: x[2 * u],
            t: x[2 * u + 1],
        })
        .collect();
    let front: Vec<InvariantSet> = ends.iter().map(triangle_invariants_front).collect();
    let back: Vec<InvariantSet> = ends.iter().map(triangle_invariants_back).collect();
    let mut out = Vec::with_capacity(13);
    for &(u, v) in &TETRA_EDGES {
        let (ku, kv) = (cone_point_index(u, v), cone_point_index(v, u));
        out.push(front[u].rho[ku] - front[v].rho[kv]);
        out.push(back[u].rho[ku] - back[v].rho[kv]);
    }
    out.push(front.iter().map(|f| f.sigma[0].ln()).sum());
    out
}

fn check_orders(ends: &[EndOrbifoldParams; 4]) -> Result<(), InvariantsError> {
    match ends.iter().position(|e| e.orders != (3, 3, 3)) {
        Some(k) => Err(InvariantsError::WrongOrders(k)),
        None => Ok(()),
    }
}

/// Feasibility of four (3,3,3) ends under the gluing system.
pub fn solve_doubled_tetrahedron_constraints(
    ends: &[EndOrbifoldParams; 4],
) -> Result<Feasibility, InvariantsError> {
    check_orders(ends)?;
    let s = ends[0].s;
    if ends.iter().any(|e| (e.s - s).abs() > S_TOL) {
        return Ok(Feasibility::Infeasible(InfeasibleReason::SMismatch));
    }
    let c = c_of_s(s);
    let product: f64 = ends.iter().map(|e| e.t).product();
    if (product - c).abs() > T_PRODUCT_TOL * c.max(1.0) {
        return Ok(Feasibility::Infeasible(InfeasibleReason::TProduct));
    }
    Ok(Feasibility::Feasible { c })
}

/// Rank of a central-difference Jacobian of `f` at `x`.
pub fn jacobian_rank(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], step: f64) -> usize {
    let m = f(x).len();
    if m == 0 {
        return 0;
    }
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut plus = x.to_vec();
        plus[j] += step;
        let mut minus = x.to_vec();
        minus[j] -= step;
        let (fp, fm) = (f(&plus), f(&minus));
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    jac.singular_values().iter().filter(|s| **s >= RANK_TOL).count()
}

/// `8 − rank` of the gluing Jacobian at a feasible point.
pub fn local_dimension_with_step(
    ends: &[EndOrbifoldParams; 4],
    step: f64,
) -> Result<usize, InvariantsError> {
    match solve_doubled_tetrahedron_constraints(ends)? {
        Feasibility::Feasible { .. } => {}
        Feasibility::Infeasible(reason) => return Err(InvariantsError::NotFeasible(reason)),
    }
    let orders = [ends[0].orders, ends[1].orders, ends[2].orders, ends[3].orders];
    let x: Vec<f64> = ends.iter().flat_map(|e| [e.s, e.t]).collect();
    let f = |y: &[f64]| gluing_residuals(&orders, y);
    Ok(x.len() - jacobian_rank(&f, &x, step))
}

/// Local dimension of the solution set with the default step 1e-5.
pub fn local_dimension(ends: &[EndOrbifoldParams; 4]) -> Result<usize, InvariantsError> {
    local_dimension_with_step(ends, 1e-5)
}

/// Local dimension of a single end's `(s, t)` space, which has no
/// constraints.
pub fn single_end_dimension(end: &EndOrbifoldParams, step: f64) -> usize {
    let f = |_: &[f64]| Vec::new();
    2 - jacobian_rank(&f, &[end.s, end.t], step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_examples() {
        assert!((tau(3).unwrap() + 1.0).abs() < 1e-15);
        assert!((tau(2).unwrap() + 2.0).abs() < 1e-15);
        assert!(tau(4).unwrap().abs() < 1e-15);
        assert_eq!(tau(1), Err(InvariantsError::InvalidOrder(1)));
    }

    #[test]
    fn front_examples() {
        let inv = triangle_invariants_front(&EndOrbifoldParams::s333(1.0, 1.0).unwrap());
        assert!(inv.rho.iter().chain(&inv.sigma).all(|x| (x - 1.0).abs() < 1e-14));
        let inv = triangle_invariants_front(&EndOrbifoldParams::s333(2.0, 1.0).unwrap());
        assert!(inv.rho.iter().all(|r| (r - 3.0).abs() < 1e-14));
        assert!((inv.sigma[0] - 3.0).abs() < 1e-14 && (inv.sigma[1] - 9.0).abs() < 1e-13);
    }

    #[test]
    fn back_examples() {
        let inv = triangle_invariants_back(&EndOrbifoldParams::s333(2.0, 1.0).unwrap());
        assert!(inv.rho.iter().all(|r| (r - 0.75).abs() < 1e-14));
        assert!((inv.sigma[0] - 0.375).abs() < 1e-14 && (inv.sigma[1] - 1.125).abs() < 1e-14);
        assert!(inv.identity_residual().abs() < 1e-14);
    }

    #[test]
    fn feasibility_examples() {
        let c = c_of_s(1.0);
        let ends = [0.5, 2.0, 1.0, c].map(|t| EndOrbifoldParams::s333(1.0, t).unwrap());
        assert_eq!(
            solve_doubled_tetrahedron_constraints(&ends).unwrap(),
            Feasibility::Feasible { c }
        );
        let mut mismatched = ends;
        mismatched[3].s = 2.0;
        assert_eq!(
            solve_doubled_tetrahedron_constraints(&mismatched).unwrap(),
            Feasibility::Infeasible(InfeasibleReason::SMismatch)
        );
        let mut off = ends;
        off[0].t *= 1.5;
        assert_eq!(
            solve_doubled_tetrahedron_constraints(&off).unwrap(),
            Feasibility::Infeasible(InfeasibleReason::TProduct)
        );
        let mut wrong = ends;
        wrong[2].orders = (2, 3, 6);
        assert_eq!(
            solve_doubled_tetrahedron_constraints(&wrong),
            Err(InvariantsError::WrongOrders(2))
        );
    }

    #[test]
    fn dimension_four_and_two() {
        let s = 1.2;
        let c = c_of_s(s);
        let ends = [0.7, 1.1, 1.9, c / (0.7 * 1.1 * 1.9)].map(|t| EndOrbifoldParams::s333(s, t).unwrap());
        assert_eq!(local_dimension(&ends).unwrap(), 4);
        assert_eq!(local_dimension_with_step(&ends, 1e-6).unwrap(), 4);
        assert_eq!(single_end_dimension(&ends[0], 1e-5), 2);
    }
}
