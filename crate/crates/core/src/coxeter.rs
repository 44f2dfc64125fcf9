//! Vinberg reflection groups.
//!
//! A polytope `P = {α_i ≥ 0}` with dihedral orders `n_ij` and a Cartan matrix
//! `a_ij = α_i(v_j)` determines reflections `R_i = I − v_i α_iᵀ`. The orbit of
//! `P` under the generated group is enumerated breadth first.

use crate::convex::{ConvexBody, ConvexError};
use crate::dedup::ApproxKeySet;
use crate::projective::{ProjError, ProjMap};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use thiserror::Error;

/// Default cap on the number of orbit elements.
pub const DEFAULT_ORBIT_CAP: usize = 200_000;
/// Grid used for duplicate detection of group elements.
pub const DEDUP_GRID: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoxeterError {
    #[error("inconsistent orders: {0}")]
    InconsistentOrders(String),
    #[error("Cartan matrix is not realizable on this polytope (residual {0:.3e})")]
    NonRealizableCartan(f64),
    #[error("Cartan matrix violates {0}")]
    InvalidCartan(String),
    #[error("relation (R_{i} R_{j})^{order} = I fails (residual {residual:.3e})")]
    RelationFailure {
        i: usize,
        j: usize,
        order: u32,
        residual: f64,
    },
    #[error("orbit exceeds {0} elements")]
    ExplosionGuard(usize),
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error(transparent)]
    Projective(#[from] ProjError),
}

/// Dihedral orders between facets; `None` marks an infinite order. Diagonal
/// entries are ignored.
pub type OrderMatrix = Vec<Vec<Option<u32>>>;

/// Product-preserving rescalings `a_ij ↦ λ_ij a_ij`, `a_ji ↦ a_ji / λ_ij`,
/// keyed by `(i, j)` with `i < j`. Missing pairs default to 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeformationParams {
    pub lambdas: BTreeMap<(usize, usize), f64>,
}

impl DeformationParams {
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn with(mut self, i: usize, j: usize, lambda: f64) -> Self {
        self.lambdas.insert((i.min(j), i.max(j)), if i < j { lambda } else { 1.0 / lambda });
        self
    }

    pub fn lambda(&self, i: usize, j: usize) -> f64 {
        *self.lambdas.get(&(i, j)).unwrap_or(&1.0)
    }
}

/// `2cos(π/n)`, or 2 for an infinite order.
pub fn order_coefficient(order: Option<u32>) -> f64 {
    match order {
        Some(n) => 2.0 * (PI / n as f64).cos(),
        None => 2.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxeterSystem {
    polytope: ConvexBody,
    orders: OrderMatrix,
    alphas: Vec<DVector<f64>>,
    vs: Vec<DVector<f64>>,
    cartan: DMatrix<f64>,
    reflections: Vec<ProjMap>,
}

fn check_orders(orders: &OrderMatrix, facets: usize) -> Result<(), CoxeterError> {
    if orders.len() != facets || orders.iter().any(|r| r.len() != facets) {
        return Err(CoxeterError::InconsistentOrders(format!(
            "expected a {facets}×{facets} order matrix"
        )));
    }
    for i in 0..facets {
        for j in i + 1..facets {
            if orders[i][j] != orders[j][i] {
                return Err(CoxeterError::InconsistentOrders(format!(
                    "n_{i}{j} ≠ n_{j}{i}"
                )));
            }
            if matches!(orders[i][j], Some(n) if n < 2) {
                return Err(CoxeterError::InconsistentOrders(format!(
                    "n_{i}{j} must be at least 2"
                )));
            }
        }
    }
    Ok(())
}

impl CoxeterSystem {
    /// Realises a given Cartan matrix on the polytope's facet functionals by
    /// solving `α_j(v_i) = a_ji`. Relations are not verified here.
    pub fn from_cartan(
        polytope: ConvexBody,
        orders: OrderMatrix,
        cartan: DMatrix<f64>,
    ) -> Result<Self, CoxeterError> {
        let alphas: Vec<DVector<f64>> = polytope.halfspaces().to_vec();
        let m = alphas.len();
        let d = polytope.dim() + 1;
        check_orders(&orders, m)?;
        if cartan.shape() != (m, m) {
            return Err(CoxeterError::InconsistentOrders(format!(
                "Cartan matrix must be {m}×{m}"
            )));
        }
        let normals = DMatrix::from_fn(m, d, |i, j| alphas[i][j]);
        let svd = normals.clone().svd(true, true);
        let rank = svd.rank(1e-12 * svd.singular_values.max());
        if rank < d {
            return Err(CoxeterError::NonRealizableCartan(f64::INFINITY));
        }
        let solution = svd
            .solve(&cartan, 1e-12)
            .map_err(|_| CoxeterError::NonRealizableCartan(f64::INFINITY))?;
        let residual = (&normals * &solution - &cartan).amax();
        if residual > 1e-9 * cartan.amax().max(1.0) {
            return Err(CoxeterError::NonRealizableCartan(residual));
        }
        let vs: Vec<DVector<f64>> = (0..m).map(|i| solution.column(i).into_owned()).collect();
        let reflections = (0..m)
            .map(|i| {
                let r = DMatrix::identity(d, d) - &vs[i] * alphas[i].transpose();
                ProjMap::new(r)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            polytope,
            orders,
            alphas,
            vs,
            cartan,
            reflections,
        })
    }

    pub fn polytope(&self) -> &ConvexBody {
        &self.polytope
    }

    pub fn orders(&self) -> &OrderMatrix {
        &self.orders
    }

    pub fn cartan(&self) -> &DMatrix<f64> {
        &self.cartan
    }

    pub fn reflections(&self) -> &[ProjMap] {
        &self.reflections
    }

    pub fn alphas(&self) -> &[DVector<f64>] {
        &self.alphas
    }

    pub fn reflection_vectors(&self) -> &[DVector<f64>] {
        &self.vs
    }

    pub fn rank(&self) -> usize {
        self.reflections.len()
    }
}

/// Builds the Cartan matrix from orders and λ's, realises it on the
/// polytope, and verifies the type invariants.
pub fn cartan_from_orders(
    polytope: &ConvexBody,
    orders: &OrderMatrix,
    params: &DeformationParams,
) -> Result<CoxeterSystem, CoxeterError> {
    let m = polytope.halfspaces().len();
    check_orders(orders, m)?;
    let mut cartan = DMatrix::from_element(m, m, 0.0);
    for i in 0..m {
        cartan[(i, i)] = 2.0;
        for j in i + 1..m {
            let lambda = params.lambda(i, j);
            if !(lambda > 0.0) {
                return Err(CoxeterError::InvalidCartan(format!("λ_{i}{j} must be positive")));
            }
            let c = order_coefficient(orders[i][j]);
            cartan[(i, j)] = -lambda * c;
            cartan[(j, i)] = -c / lambda;
        }
    }
    let sys = CoxeterSystem::from_cartan(polytope.clone(), orders.clone(), cartan)?;
    verify_cartan(&sys)?;
    let report = relation_check(&sys);
    if let Some(worst) = report
        .pairs
        .iter()
        .find(|p| p.residual > 1e-9 * p.scale || !p.minimal)
    {
        return Err(CoxeterError::RelationFailure {
            i: worst.i,
            j: worst.j,
            order: worst.order,
            residual: worst.residual,
        });
    }
    Ok(sys)
}

fn verify_cartan(sys: &CoxeterSystem) -> Result<(), CoxeterError> {
    let a = &sys.cartan;
    let m = a.nrows();
    for i in 0..m {
        if (a[(i, i)] - 2.0).abs() > 1e-10 {
            return Err(CoxeterError::InvalidCartan(format!("a_{i}{i} = 2")));
        }
        for j in 0..m {
            if i == j {
                continue;
            }
            if a[(i, j)] > 1e-12 {
                return Err(CoxeterError::InvalidCartan(format!("a_{i}{j} ≤ 0")));
            }
            if (a[(i, j)] == 0.0) != (a[(j, i)] == 0.0) {
                return Err(CoxeterError::InvalidCartan(format!("a_{i}{j} = 0 ⇔ a_{j}{i} = 0")));
            }
            if let Some(n) = sys.orders[i][j] {
                let want = 4.0 * (PI / n as f64).cos().powi(2);
                if (a[(i, j)] * a[(j, i)] - want).abs() > 1e-10 {
                    return Err(CoxeterError::InvalidCartan(format!(
                        "a_{i}{j} a_{j}{i} = 4cos²(π/{n})"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRelation {
    pub i: usize,
    pub j: usize,
    pub order: u32,
    /// ‖(R_i R_j)^n − I‖_∞.
    pub residual: f64,
    /// No smaller positive power is the identity (within 1e-6).
    pub minimal: bool,
    /// max(1, ‖R_i R_j‖_∞^n): scale for relative tolerances.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub pairs: Vec<PairRelation>,
    pub max_residual: f64,
    pub all_minimal: bool,
}

/// Residuals of the dihedral relations for all finite-order pairs.
pub fn relation_check(sys: &CoxeterSystem) -> RelationReport {
    let m = sys.rank();
    let d = sys.polytope.dim() + 1;
    let id = DMatrix::<f64>::identity(d, d);
    let inf_norm = |x: &DMatrix<f64>| {
        x.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let Some(order) = sys.orders[i][j] else {
                continue;
            };
            let rr = sys.reflections[i].matrix() * sys.reflections[j].matrix();
            let mut power = id.clone();
            let mut minimal = true;
            for k in 1..=order {
                power = &power * &rr;
                if k < order && inf_norm(&(&power - &id)) <= 1e-6 {
                    minimal = false;
                }
            }
            pairs.push(PairRelation {
                i,
                j,
                order,
                residual: inf_norm(&(&power - &id)),
                minimal,
                scale: inf_norm(&rr).powi(order as i32).max(1.0),
            });
        }
    }
    let max_residual = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    let all_minimal = pairs.iter().all(|p| p.minimal);
    RelationReport {
        pairs,
        max_residual,
        all_minimal,
    }
}

/// One group element `g` with the tile `g(P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitElement {
    /// Generator indices; the element is `R_{w[0]} R_{w[1]} ⋯`.
    pub word: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub depth: usize,
}

#[derive(Debug, Clone)]
pub struct OrbitComplex {
    pub elements: Vec<OrbitElement>,
    /// Oriented vertices of the base polytope.
    pub base_vertices: Vec<DVector<f64>>,
}

impl OrbitComplex {
    /// Vertex lifts of every tile, consistently oriented by the linear action.
    pub fn tiles(&self) -> Vec<Vec<DVector<f64>>> {
        self.elements
            .iter()
            .map(|e| self.base_vertices.iter().map(|v| &e.matrix * v).collect())
            .collect()
    }

    /// All distinct tile vertices as unit vectors.
    pub fn vertices(&self) -> Vec<DVector<f64>> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for tile in self.tiles() {
            for v in tile {
                let u = &v / v.norm();
                let key: Vec<i64> = u.iter().map(|x| (x * 1e9).round() as i64).collect();
                if seen.insert(key) {
                    out.push(u);
                }
            }
        }
        out
    }

    /// Convex hull of the union of the tiles.
    pub fn hull(&self, samples_per_edge: usize) -> Result<ConvexBody, ConvexError> {
        ConvexBody::hull_of(&self.vertices(), samples_per_edge)
    }
}

/// Projective canonical form: `|det| = 1`, first entry above 1e-6 in
/// magnitude positive.
fn canonical(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows() as f64;
    let mut c = m / m.determinant().abs().powf(1.0 / d);
    let first = c.iter().copied().find(|x| x.abs() > 1e-6);
    if matches!(first, Some(x) if x < 0.0) {
        c.neg_mut();
    }
    c
}

/// Breadth-first enumeration of reduced words up to `word_length_max`,
/// deduplicated projectively. Elements are ordered by length, then
/// lexicographically by word.
pub fn fundamental_orbit(
    sys: &CoxeterSystem,
    word_length_max: usize,
    cap: usize,
) -> Result<OrbitComplex, CoxeterError> {
    let d = sys.polytope.dim() + 1;
    let base_vertices = sys.polytope.vertices().to_vec();
    let identity = OrbitElement {
        word: vec![],
        matrix: DMatrix::identity(d, d),
        depth: 0,
    };
    let mut seen = ApproxKeySet::new(DEDUP_GRID);
    seen.insert(canonical(&identity.matrix).as_slice());
    let mut elements = vec![identity];
    let mut frontier = vec![0usize];
    for depth in 1..=word_length_max {
        let candidates: Vec<Vec<(Vec<usize>, DMatrix<f64>)>> = frontier
            .par_iter()
            .map(|&idx| {
                let parent = &elements[idx];
                (0..sys.rank())
                    .filter(|&i| parent.word.last() != Some(&i))
                    .map(|i| {
                        let mut word = parent.word.clone();
                        word.push(i);
                        (word, &parent.matrix * sys.reflections[i].matrix())
                    })
                    .collect()
            })
            .collect();
        let mut next = Vec::new();
        for (word, matrix) in candidates.into_iter().flatten() {
            if !seen.insert(canonical(&matrix).as_slice()) {
                continue;
            }
            next.push(elements.len());
            elements.push(OrbitElement {
                word,
                matrix,
                depth,
            });
            if elements.len() > cap {
                return Err(CoxeterError::ExplosionGuard(cap));
            }
        }
        frontier = next;
    }
    Ok(OrbitComplex {
        elements,
        base_vertices,
    })
}

/// Standard simplex `{x_i ≥ 0}` in RP^{dim}.
pub fn standard_simplex(dim: usize) -> ConvexBody {
    let hs = (0..=dim)
        .map(|k| DVector::from_fn(dim + 1, |i, _| if i == k { 1.0 } else { 0.0 }))
        .collect();
    ConvexBody::polytope(hs, 4).expect("simplex is properly convex")
}

/// All off-diagonal orders equal to `n`.
pub fn uniform_orders(facets: usize, n: u32) -> OrderMatrix {
    (0..facets)
        .map(|i| (0..facets).map(|j| if i == j { None } else { Some(n) }).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_cartan() {
        let sys = cartan_from_orders(&standard_simplex(2), &uniform_orders(3, 3), &DeformationParams::uniform())
            .unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert!((sys.cartan() - want).amax() < 1e-12);
        for r in sys.reflections() {
            let sq = r.matrix() * r.matrix();
            assert!((sq - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
        }
        let report = relation_check(&sys);
        assert!(report.max_residual < 1e-10);
        assert!(report.all_minimal);
        let rr = sys.reflections()[0].matrix() * sys.reflections()[1].matrix();
        assert!(rr.trace().abs() < 1e-12);
    }

    #[test]
    fn lambda_preserves_product() {
        let params = DeformationParams::uniform().with(0, 1, 2.0);
        let sys = cartan_from_orders(&standard_simplex(2), &uniform_orders(3, 3), &params).unwrap();
        let a = sys.cartan();
        assert!((a[(0, 1)] + 2.0).abs() < 1e-12);
        assert!((a[(1, 0)] + 0.5).abs() < 1e-12);
        assert!((a[(0, 1)] * a[(1, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corrupted_cartan_fails_relations() {
        let mut a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        a[(0, 1)] = -1.3;
        let sys = CoxeterSystem::from_cartan(standard_simplex(2), uniform_orders(3, 3), a).unwrap();
        let report = relation_check(&sys);
        assert!(report.max_residual > 1e-6);
    }

    #[test]
    fn inconsistent_orders_rejected() {
        let mut orders = uniform_orders(3, 3);
        orders[0][1] = Some(4);
        let err = cartan_from_orders(&standard_simplex(2), &orders, &DeformationParams::uniform());
        assert!(matches!(err, Err(CoxeterError::InconsistentOrders(_))));
        let err = cartan_from_orders(&standard_simplex(2), &uniform_orders(4, 3), &DeformationParams::uniform());
        assert!(matches!(err, Err(CoxeterError::InconsistentOrders(_))));
    }

    #[test]
    fn depth_zero_and_two() {
        let sys = cartan_from_orders(&standard_simplex(2), &uniform_orders(3, 3), &DeformationParams::uniform())
            .unwrap();
        assert_eq!(fundamental_orbit(&sys, 0, 100).unwrap().elements.len(), 1);
        let orbit = fundamental_orbit(&sys, 2, 100).unwrap();
        assert_eq!(orbit.elements.len(), 10);
        assert!(matches!(
            fundamental_orbit(&sys, 6, 20),
            Err(CoxeterError::ExplosionGuard(20))
        ));
    }
}
