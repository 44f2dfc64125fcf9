//! Convex cones in R^{n+1} and properly convex bodies in RP^n.
//!
//! A [`ConvexBody`] is the projectivisation of a closed convex cone cut out by
//! linear half-spaces `h · x ≥ 0` and quadric nappes `xᵀ Q x ≥ 0`, carried
//! together with a cloud of boundary samples. Samples are oriented lifts (unit
//! vectors on the same side as the interior point), so a body's closure is
//! represented on S^n and antipodal pairs among samples expose lines.

use crate::lp;
use crate::projective::{vector_angle, Mode, ProjError, ProjPoint};
use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Margin by which the interior point must satisfy every constraint.
pub const INTERIOR_MARGIN: f64 = 1e-9;
/// Functional margin required on all samples to certify proper convexity.
pub const PROPER_MARGIN: f64 = 1e-8;
/// Default number of generator samples for non-polyhedral cones.
pub const DEFAULT_GENERATOR_SAMPLES: usize = 2000;

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvexError {
    #[error("cone or body is not properly convex")]
    NotProperlyConvex,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("interior point violates a constraint (margin {0:.3e})")]
    InteriorViolation(f64),
    #[error("point is not on the boundary (margin {0:.3e})")]
    PointNotOnBoundary(f64),
    #[error("no supporting functional found at boundary point {0}")]
    NoSupport(usize),
    #[error("empty input")]
    Empty,
    #[error("convex hull failed: {0}")]
    Hull(String),
    #[error(transparent)]
    Projective(#[from] ProjError),
}

fn unit(v: &DVector<f64>) -> DVector<f64> {
    v / v.norm()
}

fn rank(rows: &[&DVector<f64>], dim: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j] / rows[i].norm());
    m.singular_values().iter().filter(|s| **s > RANK_TOL).count()
}

/// Extreme rays of `{x ∈ R^dim : h · x ≥ 0 ∀h}` as unit vectors.
///
/// Brute force over (dim − 1)-subsets; intended for the small cones used in
/// duality and certification work.
pub fn extreme_rays(halfspaces: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    if dim == 1 {
        return vec![DVector::from_element(1, 1.0)];
    }
    let normals: Vec<DVector<f64>> = halfspaces.iter().map(unit).collect();
    let mut rays: Vec<DVector<f64>> = Vec::new();
    for combo in (0..normals.len()).combinations(dim - 1) {
        let m = DMatrix::from_fn(dim - 1, dim, |i, j| normals[combo[i]][j]);
        if m.singular_values().iter().filter(|s| **s > RANK_TOL).count() < dim - 1 {
            continue;
        }
        let Some(null) = complement_vector(&m) else {
            continue;
        };
        for candidate in [null.clone(), -null] {
            if normals.iter().all(|h| h.dot(&candidate) >= -1e-10) {
                let c = unit(&candidate);
                if !rays.iter().any(|r| (r - &c).norm() < 1e-9) {
                    rays.push(c);
                }
                break;
            }
        }
    }
    rays
}

/// A unit vector orthogonal to all rows of `m` (assumed rank dim − 1).
fn complement_vector(m: &DMatrix<f64>) -> Option<DVector<f64>> {
    let dim = m.ncols();
    let mut padded = DMatrix::zeros(dim, dim);
    padded.rows_mut(0, m.nrows()).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    Some(DVector::from_iterator(dim, v_t.row(idx).iter().copied()))
}

/// Euclidean nearest point of `x` in the polyhedral cone `{h · y ≥ 0}` by
/// enumerating candidate active sets.
fn project_onto_polyhedral(halfspaces: &[DVector<f64>], x: &DVector<f64>) -> DVector<f64> {
    let dim = x.len();
    let normals: Vec<DVector<f64>> = halfspaces.iter().map(unit).collect();
    let feasible = |y: &DVector<f64>| normals.iter().all(|h| h.dot(y) >= -1e-12);
    if feasible(x) {
        return x.clone();
    }
    let mut best = DVector::zeros(dim);
    let mut best_dist = x.norm();
    for size in 1..=normals.len().min(dim) {
        for combo in (0..normals.len()).combinations(size) {
            let a = DMatrix::from_fn(size, dim, |i, j| normals[combo[i]][j]);
            let gram = &a * a.transpose();
            let Some(pinv) = gram.clone().pseudo_inverse(1e-12).ok() else {
                continue;
            };
            let y = x - a.transpose() * (pinv * (&a * x));
            if feasible(&y) {
                let d = (x - &y).norm();
                if d < best_dist {
                    best_dist = d;
                    best = y;
                }
            }
        }
    }
    best
}

/// Open convex cone with vertex at the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    Polyhedral(PolyCone),
    /// Image `{M y : y₀ > ‖(y₁, …, y_n)‖}` of the standard Lorentz cone.
    Lorentz { map: DMatrix<f64> },
}

/// Polyhedral cone in generator form, half-space form, or both.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCone {
    ambient: usize,
    generators: Option<Vec<DVector<f64>>>,
    halfspaces: Option<Vec<DVector<f64>>>,
}

impl PolyCone {
    pub fn from_generators(generators: Vec<DVector<f64>>) -> Result<Self, ConvexError> {
        let ambient = generators.first().ok_or(ConvexError::Empty)?.len();
        check_dims(&generators, ambient)?;
        Ok(Self {
            ambient,
            generators: Some(generators),
            halfspaces: None,
        })
    }

    pub fn from_halfspaces(halfspaces: Vec<DVector<f64>>) -> Result<Self, ConvexError> {
        let ambient = halfspaces.first().ok_or(ConvexError::Empty)?.len();
        check_dims(&halfspaces, ambient)?;
        Ok(Self {
            ambient,
            generators: None,
            halfspaces: Some(halfspaces),
        })
    }

    /// Positive orthant of R^dim.
    pub fn orthant(dim: usize) -> Self {
        let basis: Vec<DVector<f64>> = (0..dim)
            .map(|k| DVector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 }))
            .collect();
        Self {
            ambient: dim,
            generators: Some(basis.clone()),
            halfspaces: Some(basis),
        }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    /// Extreme generators, computed from the half-space form when needed.
    pub fn generators(&self) -> Vec<DVector<f64>> {
        match (&self.generators, &self.halfspaces) {
            (Some(g), _) => g.clone(),
            (None, Some(h)) => extreme_rays(h, self.ambient),
            (None, None) => unreachable!("constructors fill one form"),
        }
    }

    /// Facet functionals, computed from the generator form when needed.
    pub fn halfspaces(&self) -> Vec<DVector<f64>> {
        match (&self.halfspaces, &self.generators) {
            (Some(h), _) => h.clone(),
            (None, Some(g)) => extreme_rays(g, self.ambient),
            (None, None) => unreachable!("constructors fill one form"),
        }
    }

    /// Closure contains no line and the cone has nonempty interior.
    pub fn is_properly_convex(&self) -> bool {
        let gens = self.generators();
        if gens.is_empty() || rank(&gens.iter().collect_vec(), self.ambient) < self.ambient {
            return false;
        }
        let hs = self.halfspaces();
        if rank(&hs.iter().collect_vec(), self.ambient) < self.ambient {
            return false;
        }
        let rows: Vec<DVector<f64>> = gens.iter().map(unit).collect();
        matches!(lp::max_min_margin(self.ambient, &rows, &[]), Some((_, t)) if t > PROPER_MARGIN)
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.halfspaces()
            .iter()
            .all(|h| h.dot(x) / h.norm() > INTERIOR_MARGIN * x.norm())
    }
}

fn check_dims(vs: &[DVector<f64>], dim: usize) -> Result<(), ConvexError> {
    for v in vs {
        if v.len() != dim {
            return Err(ConvexError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    Ok(())
}

impl Cone {
    pub fn orthant(dim: usize) -> Self {
        Cone::Polyhedral(PolyCone::orthant(dim))
    }

    /// `{x₀ > ‖(x₁, …, x_n)‖}` in R^dim.
    pub fn lorentz(dim: usize) -> Self {
        Cone::Lorentz {
            map: DMatrix::identity(dim, dim),
        }
    }

    pub fn ambient(&self) -> usize {
        match self {
            Cone::Polyhedral(p) => p.ambient,
            Cone::Lorentz { map } => map.nrows(),
        }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        match self {
            Cone::Polyhedral(p) => p.contains(x),
            Cone::Lorentz { map } => {
                let Some(inv) = map.clone().try_inverse() else {
                    return false;
                };
                let y = inv * x;
                let tail = y.rows(1, y.len() - 1).norm();
                y[0] - tail > INTERIOR_MARGIN * y.norm()
            }
        }
    }

    pub fn is_properly_convex(&self) -> bool {
        match self {
            Cone::Polyhedral(p) => p.is_properly_convex(),
            Cone::Lorentz { map } => map.determinant().abs() > 1e-300 && map.nrows() >= 2,
        }
    }

    /// Dual cone `{φ : φ(v) > 0 ∀ v ∈ clo(V) \ {0}}` under the standard pairing.
    pub fn dual(&self) -> Result<Cone, ConvexError> {
        if !self.is_properly_convex() {
            return Err(ConvexError::NotProperlyConvex);
        }
        Ok(match self {
            Cone::Polyhedral(p) => Cone::Polyhedral(PolyCone {
                ambient: p.ambient,
                generators: p.halfspaces.clone(),
                halfspaces: p.generators.clone(),
            }),
            Cone::Lorentz { map } => Cone::Lorentz {
                map: map
                    .clone()
                    .try_inverse()
                    .ok_or(ConvexError::NotProperlyConvex)?
                    .transpose(),
            },
        })
    }

    /// A point of the open cone.
    pub fn interior_point(&self) -> DVector<f64> {
        match self {
            Cone::Polyhedral(p) => {
                let gens = p.generators();
                let mut s = DVector::zeros(p.ambient);
                for g in &gens {
                    s += unit(g);
                }
                unit(&s)
            }
            Cone::Lorentz { map } => {
                let mut e0 = DVector::zeros(map.nrows());
                e0[0] = 1.0;
                unit(&(map * e0))
            }
        }
    }

    /// Boundary generators: the extreme rays for polyhedral cones, `count`
    /// evenly spread rays for Lorentz cones.
    pub fn sample_generators(&self, count: usize) -> Vec<DVector<f64>> {
        match self {
            Cone::Polyhedral(p) => p.generators().iter().map(unit).collect(),
            Cone::Lorentz { map } => sphere_points(map.nrows() - 1, count)
                .into_iter()
                .map(|u| {
                    let mut y = DVector::zeros(map.nrows());
                    y[0] = 1.0;
                    y.rows_mut(1, u.len()).copy_from(&u);
                    unit(&(map * y))
                })
                .collect(),
        }
    }

    /// Projectivised body with boundary samples.
    pub fn to_body(&self, samples_per_edge: usize) -> Result<ConvexBody, ConvexError> {
        match self {
            Cone::Polyhedral(p) => {
                let hs = p.halfspaces();
                ConvexBody::polytope(hs, samples_per_edge)
            }
            Cone::Lorentz { map } => {
                let inv = map.clone().try_inverse().ok_or(ConvexError::NotProperlyConvex)?;
                let dim = map.nrows();
                let mut j = DMatrix::identity(dim, dim);
                for k in 1..dim {
                    j[(k, k)] = -1.0;
                }
                let q = inv.transpose() * j * &inv;
                let interior = ProjPoint::spherical(&self.interior_point())?;
                let samples = self
                    .sample_generators(DEFAULT_GENERATOR_SAMPLES)
                    .into_iter()
                    .map(|g| ProjPoint::spherical(&g))
                    .collect::<Result<Vec<_>, _>>()?;
                ConvexBody::new(dim - 1, vec![], vec![q], samples, interior)
            }
        }
    }
}

/// Roughly uniform unit vectors in R^k (k = 1, 2, 3 exact patterns; higher
/// dimensions use a deterministic Halton-based projection).
pub fn sphere_points(k: usize, count: usize) -> Vec<DVector<f64>> {
    match k {
        0 => vec![],
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..count)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / count as f64;
                DVector::from_vec(vec![a.cos(), a.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    DVector::from_vec(vec![r * a.cos(), r * a.sin(), z])
                })
                .collect()
        }
        _ => {
            let primes = [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29];
            (1..=count)
                .map(|i| {
                    let v = DVector::from_fn(k, |j, _| {
                        let (u1, u2) = (halton(i as u64, primes[2 * j % 10]), halton(i as u64, primes[(2 * j + 1) % 10]));
                        (-2.0 * u1.max(1e-12).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                    });
                    unit(&v)
                })
                .collect()
        }
    }
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Result of [`ConvexBody::properly_convex_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvexityVerdict {
    ProperlyConvex,
    ConvexNotProper,
    NotConvex,
}

/// Closed convex region of RP^n given by constraints and boundary samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    dim: usize,
    halfspaces: Vec<DVector<f64>>,
    quadrics: Vec<DMatrix<f64>>,
    samples: Vec<ProjPoint>,
    interior: ProjPoint,
    chart: DVector<f64>,
    vertices: Vec<DVector<f64>>,
}

impl ConvexBody {
    /// Builds a body; `interior` must satisfy every constraint with margin.
    ///
    /// Samples are re-oriented to lie on the interior's side of the chart.
    pub fn new(
        dim: usize,
        halfspaces: Vec<DVector<f64>>,
        quadrics: Vec<DMatrix<f64>>,
        samples: Vec<ProjPoint>,
        interior: ProjPoint,
    ) -> Result<Self, ConvexError> {
        let size = dim + 1;
        check_dims(&halfspaces, size)?;
        for p in samples.iter().chain(std::iter::once(&interior)) {
            if p.coords().len() != size {
                return Err(ConvexError::DimensionMismatch {
                    expected: size,
                    got: p.coords().len(),
                });
            }
        }
        for q in &quadrics {
            if q.nrows() != size || q.ncols() != size {
                return Err(ConvexError::DimensionMismatch {
                    expected: size,
                    got: q.nrows(),
                });
            }
        }
        let mut u = interior.coords().clone();
        if let Some(h) = halfspaces.first() {
            if h.dot(&u) < 0.0 {
                u.neg_mut();
            }
        }
        let mut chart = DVector::zeros(size);
        for h in &halfspaces {
            chart += unit(h);
        }
        for q in &quadrics {
            chart += unit(&(q * &u));
        }
        if chart.norm() < 1e-12 || chart.dot(&u) <= 0.0 {
            chart = u.clone();
        }
        let chart = unit(&chart);
        let mut body = Self {
            dim,
            halfspaces,
            quadrics,
            samples: vec![],
            interior: ProjPoint::spherical(&u)?,
            chart,
            vertices: vec![],
        };
        let margin = body.margin(&u);
        if margin <= INTERIOR_MARGIN {
            return Err(ConvexError::InteriorViolation(margin));
        }
        body.samples = samples
            .into_iter()
            .map(|s| {
                if s.mode() == Mode::Spherical {
                    s
                } else {
                    ProjPoint::spherical(&body.orient(s.coords())).expect("unit")
                }
            })
            .collect();
        if body.quadrics.is_empty() && body.halfspaces.len() <= 24 {
            body.vertices = extreme_rays(&body.halfspaces, size);
        }
        Ok(body)
    }

    /// Polytope `{h · x ≥ 0}`; samples are the vertices plus points along
    /// edges (`samples_per_edge` interior points per edge).
    pub fn polytope(
        halfspaces: Vec<DVector<f64>>,
        samples_per_edge: usize,
    ) -> Result<Self, ConvexError> {
        let size = halfspaces.first().ok_or(ConvexError::Empty)?.len();
        let vertices = extreme_rays(&halfspaces, size);
        Self::polytope_from_parts(halfspaces, vertices, samples_per_edge)
    }

    fn polytope_from_parts(
        halfspaces: Vec<DVector<f64>>,
        vertices: Vec<DVector<f64>>,
        samples_per_edge: usize,
    ) -> Result<Self, ConvexError> {
        let size = halfspaces.first().ok_or(ConvexError::Empty)?.len();
        if vertices.len() < size {
            return Err(ConvexError::NotProperlyConvex);
        }
        let samples = polytope_boundary_samples(&halfspaces, &vertices, samples_per_edge);
        let mut center = DVector::zeros(size);
        for v in &vertices {
            center += v;
        }
        let interior = ProjPoint::spherical(&center)?;
        let samples = samples
            .into_iter()
            .map(|s| ProjPoint::spherical(&s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut body = Self::new(size - 1, halfspaces, vec![], samples, interior)?;
        body.vertices = vertices;
        Ok(body)
    }

    /// Convex hull of oriented points (all on one side of some hyperplane).
    pub fn hull_of(points: &[DVector<f64>], samples_per_edge: usize) -> Result<Self, ConvexError> {
        let size = points.first().ok_or(ConvexError::Empty)?.len();
        check_dims(points, size)?;
        let unit_pts: Vec<DVector<f64>> = points.iter().map(unit).collect();
        let halfspaces = hull_facets(&unit_pts)?;
        let mut vertices: Vec<DVector<f64>> = Vec::new();
        for p in &unit_pts {
            let tight = halfspaces.iter().filter(|h| h.dot(p).abs() < 1e-9).count();
            if tight + 1 >= size && !vertices.iter().any(|v| (v - p).norm() < 1e-9) {
                vertices.push(p.clone());
            }
        }
        Self::polytope_from_parts(halfspaces, vertices, samples_per_edge)
    }

    /// Elliptic ball `{x : d(x, center) ≤ radius}`, `radius < π/2`.
    pub fn elliptic_ball(
        center: &DVector<f64>,
        radius: f64,
        sample_count: usize,
    ) -> Result<Self, ConvexError> {
        let size = center.len();
        let c = unit(center);
        let cos2 = radius.cos().powi(2);
        let q = &c * c.transpose() - DMatrix::identity(size, size) * cos2;
        let basis = orthonormal_complement(&c);
        let samples = sphere_points(size - 1, sample_count)
            .into_iter()
            .map(|u| {
                let dir = &basis * u;
                ProjPoint::spherical(&(&c * radius.cos() + dir * radius.sin()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(
            size - 1,
            vec![c.clone()],
            vec![q],
            samples,
            ProjPoint::spherical(&c)?,
        )
    }

    /// Unit disk `{x² + y² < 1}` in the chart `[x, y, 1]`.
    pub fn unit_disk(sample_count: usize) -> Self {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -1.0, 1.0]));
        let samples = (0..sample_count)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / sample_count as f64;
                ProjPoint::spherical(&DVector::from_vec(vec![a.cos(), a.sin(), 1.0])).unwrap()
            })
            .collect();
        let interior = ProjPoint::spherical(&DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        Self::new(2, vec![], vec![q], samples, interior).expect("disk is well formed")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[DVector<f64>] {
        &self.halfspaces
    }

    pub fn quadrics(&self) -> &[DMatrix<f64>] {
        &self.quadrics
    }

    pub fn samples(&self) -> &[ProjPoint] {
        &self.samples
    }

    pub fn interior(&self) -> &ProjPoint {
        &self.interior
    }

    /// Functional positive on the body; defines the lift orientation.
    pub fn chart(&self) -> &DVector<f64> {
        &self.chart
    }

    /// Lift of `v` on the body's side of the chart hyperplane.
    pub fn orient(&self, v: &DVector<f64>) -> DVector<f64> {
        let u = unit(v);
        if self.chart.dot(&u) < 0.0 {
            -u
        } else {
            u
        }
    }

    /// Smallest normalised constraint value at the oriented lift of `x`;
    /// positive inside, zero on the boundary.
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        let u = unit(x);
        let lin = self
            .halfspaces
            .iter()
            .map(|h| h.dot(&u) / h.norm())
            .fold(f64::INFINITY, f64::min);
        let quad = self
            .quadrics
            .iter()
            .map(|q| {
                let val = u.dot(&(q * &u));
                let norm = q.norm().max(1e-300);
                // Wrong nappe counts as outside.
                if (q * &u).dot(self.interior.coords()) < 0.0 {
                    -val.abs() / norm - 1.0
                } else {
                    val / norm
                }
            })
            .fold(f64::INFINITY, f64::min);
        let side = self.chart.dot(&u);
        let m = lin.min(quad);
        if side < 0.0 {
            m.min(side)
        } else {
            m
        }
    }

    /// Strict membership of a projective point.
    pub fn contains(&self, p: &ProjPoint) -> bool {
        self.margin(&self.orient(p.coords())) > INTERIOR_MARGIN
    }

    pub fn contains_closed(&self, p: &ProjPoint, tol: f64) -> bool {
        self.margin(&self.orient(p.coords())) >= -tol
    }

    /// Vertices of a polytope (empty when unknown or curved).
    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    /// Sample cloud plus polytope vertices, as oriented unit vectors.
    fn sample_vectors(&self) -> Vec<DVector<f64>> {
        let mut out: Vec<DVector<f64>> = self.samples.iter().map(|s| s.coords().clone()).collect();
        out.extend(self.vertices.iter().cloned());
        out
    }

    /// ProperlyConvex / ConvexNotProper / NotConvex.
    pub fn properly_convex_check(&self) -> ConvexityVerdict {
        let pts = self.sample_vectors();
        // Chords between samples must stay inside the constraint region.
        let stride = (pts.len() / 200).max(1);
        let sub: Vec<&DVector<f64>> = pts.iter().step_by(stride).collect();
        let region_margin = |x: &DVector<f64>| {
            let u = unit(x);
            let lin = self
                .halfspaces
                .iter()
                .map(|h| h.dot(&u) / h.norm())
                .fold(f64::INFINITY, f64::min);
            let quad = self
                .quadrics
                .iter()
                .map(|q| u.dot(&(q * &u)) / q.norm().max(1e-300))
                .fold(f64::INFINITY, f64::min);
            lin.min(quad)
        };
        let tol = 1e-9;
        let bad_sample = sub.iter().any(|p| region_margin(p) < -tol);
        let bad_chord = bad_sample
            || (0..sub.len()).into_par_iter().any(|i| {
                (i + 1..sub.len()).any(|j| {
                    let s = sub[i] + sub[j];
                    s.norm() > 1e-12 && region_margin(&s) < -tol
                })
            });
        if bad_chord {
            return ConvexityVerdict::NotConvex;
        }
        let mut rows: Vec<DVector<f64>> = pts.iter().map(unit).collect();
        rows.push(self.interior.coords().clone());
        match lp::max_min_margin(self.dim + 1, &rows, &[]) {
            Some((_, t)) if t >= PROPER_MARGIN => ConvexityVerdict::ProperlyConvex,
            _ => ConvexityVerdict::ConvexNotProper,
        }
    }

    /// Largest elliptic length of a chord between boundary samples.
    pub fn max_chord_length(&self) -> f64 {
        max_pairwise_angle(&self.sample_vectors())
    }

    /// Supporting functional at each boundary point: vanishes there and is
    /// nonnegative on the body.
    pub fn supporting_halfspaces(
        &self,
        at: &[ProjPoint],
    ) -> Result<Vec<DVector<f64>>, ConvexError> {
        let pts = self.sample_vectors();
        let interior = self.interior.coords().clone();
        at.iter()
            .enumerate()
            .map(|(idx, p)| {
                let x = self.orient(p.coords());
                let m = self.margin(&x);
                if m.abs() > 1e-6 {
                    return Err(ConvexError::PointNotOnBoundary(m));
                }
                // Tight constraint first: its functional supports the body.
                for h in &self.halfspaces {
                    if (h.dot(&x) / h.norm()).abs() <= 1e-6 {
                        return Ok(unit(h));
                    }
                }
                for q in &self.quadrics {
                    if (x.dot(&(q * &x)) / q.norm()).abs() <= 1e-6 {
                        let g = q * &x;
                        let phi = &g - &x * (g.dot(&x));
                        return Ok(unit(&phi));
                    }
                }
                let rows: Vec<DVector<f64>> = pts
                    .iter()
                    .filter(|s| vector_angle(s, &x) > 1e-9)
                    .cloned()
                    .collect();
                lp::feasible_functional(self.dim + 1, &rows, &[x.clone()], &interior, 1e-12)
                    .map(|phi| unit(&phi))
                    .ok_or(ConvexError::NoSupport(idx))
            })
            .collect()
    }

    /// Elliptic distance from a projective point to the body (0 inside).
    pub fn distance_to(&self, x: &DVector<f64>) -> f64 {
        let u = self.orient(x);
        if self.margin(&u) >= -1e-12 {
            return 0.0;
        }
        if self.quadrics.is_empty() && self.halfspaces.len() <= 16 {
            let best = [u.clone(), -u.clone()]
                .iter()
                .map(|v| {
                    let y = project_onto_polyhedral(&self.halfspaces, v);
                    if y.norm() < 1e-12 {
                        f64::INFINITY
                    } else {
                        vector_angle(v, &y)
                    }
                })
                .fold(f64::INFINITY, f64::min);
            if best.is_finite() {
                return best;
            }
        }
        self.sample_vectors()
            .iter()
            .map(|s| vector_angle(s, &u).min(vector_angle(s, &-&u)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Elliptic distance from an interior point to the boundary.
    pub fn distance_to_boundary(&self, x: &DVector<f64>) -> f64 {
        let u = self.orient(x);
        let lin = self
            .halfspaces
            .iter()
            .map(|h| (h.dot(&u) / h.norm()).clamp(-1.0, 1.0).asin())
            .fold(f64::INFINITY, f64::min);
        if self.quadrics.is_empty() {
            return lin;
        }
        let samp = self
            .samples
            .iter()
            .map(|s| vector_angle(s.coords(), &u))
            .fold(f64::INFINITY, f64::min);
        lin.min(samp)
    }

    /// Dual body (projectivised dual cone) of a polytope.
    pub fn dual(&self, samples_per_edge: usize) -> Result<ConvexBody, ConvexError> {
        if !self.quadrics.is_empty() {
            let cone = self.to_cone()?;
            return cone.dual()?.to_body(samples_per_edge);
        }
        let verts = self.vertices.clone();
        if verts.len() < self.dim + 1 {
            return Err(ConvexError::NotProperlyConvex);
        }
        ConvexBody::polytope(verts, samples_per_edge)
    }

    /// Underlying cone for single-quadric or polyhedral bodies.
    pub fn to_cone(&self) -> Result<Cone, ConvexError> {
        if self.quadrics.is_empty() {
            return Ok(Cone::Polyhedral(PolyCone::from_halfspaces(
                self.halfspaces.clone(),
            )?));
        }
        if self.quadrics.len() == 1 {
            // Q = M^{-T} J M^{-1}: diagonalise and rescale.
            let q = &self.quadrics[0];
            let eig = q.clone().symmetric_eigen();
            let size = q.nrows();
            let mut order: Vec<usize> = (0..size).collect();
            order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
            if !(eig.eigenvalues[order[0]] > 0.0)
                || order[1..].iter().any(|&k| eig.eigenvalues[k] >= 0.0)
            {
                return Err(ConvexError::NotProperlyConvex);
            }
            let mut m = DMatrix::zeros(size, size);
            for (col, &k) in order.iter().enumerate() {
                let scale = 1.0 / eig.eigenvalues[k].abs().sqrt();
                m.set_column(col, &(eig.eigenvectors.column(k) * scale));
            }
            // Pick the nappe containing the interior.
            let mut e0 = DVector::zeros(size);
            e0[0] = 1.0;
            if (&m * e0).dot(self.interior.coords()) < 0.0 {
                m.column_mut(0).neg_mut();
            }
            return Ok(Cone::Lorentz { map: m });
        }
        Err(ConvexError::NotProperlyConvex)
    }

    pub fn to_json(&self) -> BodyJson {
        BodyJson {
            dim: self.dim,
            halfspaces: self.halfspaces.iter().map(|h| h.iter().copied().collect()).collect(),
            quadrics: self
                .quadrics
                .iter()
                .map(|q| q.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
            samples: self.samples.iter().map(|s| s.coords().iter().copied().collect()).collect(),
            interior: self.interior.coords().iter().copied().collect(),
        }
    }

    pub fn from_json(json: &BodyJson) -> Result<Self, ConvexError> {
        let size = json.dim + 1;
        let vec = |v: &Vec<f64>| -> Result<DVector<f64>, ConvexError> {
            if v.len() != size {
                return Err(ConvexError::DimensionMismatch {
                    expected: size,
                    got: v.len(),
                });
            }
            Ok(DVector::from_column_slice(v))
        };
        let halfspaces = json.halfspaces.iter().map(vec).collect::<Result<Vec<_>, _>>()?;
        let quadrics = json
            .quadrics
            .iter()
            .map(|rows| {
                if rows.len() != size || rows.iter().any(|r| r.len() != size) {
                    return Err(ConvexError::DimensionMismatch {
                        expected: size,
                        got: rows.len(),
                    });
                }
                Ok(DMatrix::from_fn(size, size, |i, j| rows[i][j]))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let samples = json
            .samples
            .iter()
            .map(|s| Ok(ProjPoint::spherical(&vec(s)?)?))
            .collect::<Result<Vec<_>, ConvexError>>()?;
        let interior = ProjPoint::spherical(&vec(&json.interior)?)?;
        Self::new(json.dim, halfspaces, quadrics, samples, interior)
    }
}

/// Serialised form: `{dim, halfspaces, quadrics, samples, interior}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyJson {
    pub dim: usize,
    pub halfspaces: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quadrics: Vec<Vec<Vec<f64>>>,
    pub samples: Vec<Vec<f64>>,
    pub interior: Vec<f64>,
}

fn orthonormal_complement(c: &DVector<f64>) -> DMatrix<f64> {
    let size = c.len();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for k in 0..size {
        let mut e = DVector::zeros(size);
        e[k] = 1.0;
        let mut v = e - c * c[k];
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        if v.norm() > 1e-8 {
            basis.push(unit(&v));
        }
        if basis.len() == size - 1 {
            break;
        }
    }
    DMatrix::from_columns(&basis)
}

/// Orthonormal basis of `c^⊥`, columns.
pub fn complement_basis(c: &DVector<f64>) -> DMatrix<f64> {
    orthonormal_complement(&unit(c))
}

fn polytope_boundary_samples(
    halfspaces: &[DVector<f64>],
    vertices: &[DVector<f64>],
    per_edge: usize,
) -> Vec<DVector<f64>> {
    let size = vertices[0].len();
    let normals: Vec<DVector<f64>> = halfspaces.iter().map(unit).collect();
    let tight: Vec<Vec<usize>> = vertices
        .iter()
        .map(|v| {
            (0..normals.len())
                .filter(|&i| normals[i].dot(v).abs() < 1e-9)
                .collect()
        })
        .collect();
    let mut out: Vec<DVector<f64>> = vertices.to_vec();
    if per_edge == 0 {
        return out;
    }
    for (a, b) in (0..vertices.len()).tuple_combinations() {
        let common: Vec<&DVector<f64>> = tight[a]
            .iter()
            .filter(|i| tight[b].contains(i))
            .map(|&i| &normals[i])
            .collect();
        let is_edge = size <= 2 || rank(&common, size) == size - 2;
        if !is_edge || size <= 2 {
            continue;
        }
        for k in 1..=per_edge {
            let t = k as f64 / (per_edge + 1) as f64;
            out.push(unit(&(&vertices[a] * (1.0 - t) + &vertices[b] * t)));
        }
    }
    out
}

/// Unit facet functionals of the cone over oriented points: brute force
/// for small inputs, qhull in an affine chart otherwise.
pub fn hull_facets(points: &[DVector<f64>]) -> Result<Vec<DVector<f64>>, ConvexError> {
    let size = points.first().ok_or(ConvexError::Empty)?.len();
    let unit_pts: Vec<DVector<f64>> = points.iter().map(unit).collect();
    let facets = if size <= 3 || unit_pts.len() <= 12 {
        extreme_rays(&unit_pts, size)
    } else {
        hull_halfspaces(&unit_pts)?
    };
    if facets.len() < size {
        return Err(ConvexError::NotProperlyConvex);
    }
    Ok(facets)
}

fn hull_halfspaces(points: &[DVector<f64>]) -> Result<Vec<DVector<f64>>, ConvexError> {
    let size = points[0].len();
    let (phi, t) =
        lp::max_min_margin(size, points, &[]).ok_or(ConvexError::NotProperlyConvex)?;
    if t <= PROPER_MARGIN {
        return Err(ConvexError::NotProperlyConvex);
    }
    let phi = unit(&phi);
    let basis = orthonormal_complement(&phi);
    let chart: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let y = basis.transpose() * (p / phi.dot(p));
            y.iter().copied().collect()
        })
        .collect();
    let qh = qhull::Qh::builder()
        .compute(true)
        .build_from_iter(chart)
        .map_err(|e| ConvexError::Hull(format!("{e:?}")))?;
    let mut out: Vec<DVector<f64>> = Vec::new();
    for facet in qh.facets() {
        let Some(normal) = facet.normal() else {
            continue;
        };
        let offset = facet.offset();
        let a = DVector::from_column_slice(&normal);
        let h = -(&basis * a + &phi * offset);
        let h = unit(&h);
        if !out.iter().any(|o| (o - &h).norm() < 1e-9) {
            out.push(h);
        }
    }
    Ok(out)
}

/// Maximum angle between pairs of vectors (rayon, deterministic max).
pub fn max_pairwise_angle(pts: &[DVector<f64>]) -> f64 {
    (0..pts.len())
        .into_par_iter()
        .map(|i| {
            (i + 1..pts.len())
                .map(|j| vector_angle(&pts[i], &pts[j]))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Hausdorff distance in the elliptic metric between two bodies.
pub fn hausdorff_distance(k1: &ConvexBody, k2: &ConvexBody) -> Result<f64, ConvexError> {
    if k1.dim != k2.dim {
        return Err(ConvexError::DimensionMismatch {
            expected: k1.dim,
            got: k2.dim,
        });
    }
    let one_sided = |a: &ConvexBody, b: &ConvexBody| {
        a.sample_vectors()
            .par_iter()
            .map(|s| b.distance_to(s))
            .reduce(|| 0.0, f64::max)
    };
    Ok(one_sided(k1, k2).max(one_sided(k2, k1)))
}

/// Injectivity-radius estimate for a body and its dual: the smaller of their
/// maximal inscribed elliptic radii.
pub fn injectivity_radius(body: &ConvexBody) -> Result<f64, ConvexError> {
    if !body.quadrics.is_empty() {
        return Err(ConvexError::NotProperlyConvex);
    }
    let (_, r1) = lp::polyhedral_inradius(&body.halfspaces).ok_or(ConvexError::NotProperlyConvex)?;
    let (_, r2) = lp::polyhedral_inradius(&body.vertices()).ok_or(ConvexError::NotProperlyConvex)?;
    Ok(r1.min(r2))
}
