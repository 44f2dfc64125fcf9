//! Homogeneous coordinates on RP^n and its double cover S^n.
//!
//! Points are stored as unit vectors. In [`Mode::Projective`] the first
//! nonzero coordinate is additionally made positive, so `v` and `-v` give the
//! same representative; in [`Mode::Spherical`] only positive rescaling is
//! quotiented out.
//!
//! The cross-ratio convention used throughout the crate is
//!
//! ```text
//! (a, b, c, d) = (α_c − α_a)(α_d − α_b) / ((α_d − α_a)(α_c − α_b))
//! ```
//!
//! for any affine coordinate α on the line. With it, `log (o, s, q, p)` is the
//! Hilbert distance from `p` to `q` when `o`, `s` are the chord endpoints
//! beyond `p` and `q` respectively; on the interval (−1, 1) this gives
//! `d(0, x) = log((1 + x)/(1 − x))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this norm a coordinate vector is treated as the zero vector.
pub const ZERO_NORM: f64 = 1e-300;
/// Entries of a unit representative below this size do not fix its sign.
pub const SIGN_TOL: f64 = 1e-12;

/// Smallest singular value above which four points are not collinear.
pub const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjError {
    #[error("zero coordinate vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("points are not collinear (third singular value {0:.3e})")]
    NotCollinear(f64),
    #[error("two of the points coincide projectively")]
    DegeneratePoints,
    #[error("matrix is singular")]
    Singular,
    #[error("determinant {0} is not ±1")]
    NotUnimodular(f64),
    #[error("orientation flag disagrees with det sign, which is a projective invariant in odd dimension")]
    OrientationMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Mode {
    /// RP^n: `v ~ s v` for every nonzero real `s`.
    #[default]
    Projective,
    /// S^n: `v ~ s v` for positive `s` only.
    Spherical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjPoint {
    coords: DVector<f64>,
    mode: Mode,
}

impl ProjPoint {
    /// Canonical representative of `v` in RP^n.
    pub fn normalize(v: &DVector<f64>) -> Result<Self, ProjError> {
        Self::with_mode(v, Mode::Projective)
    }

    pub fn spherical(v: &DVector<f64>) -> Result<Self, ProjError> {
        Self::with_mode(v, Mode::Spherical)
    }

    pub fn with_mode(v: &DVector<f64>, mode: Mode) -> Result<Self, ProjError> {
        let norm = v.norm();
        if !(norm >= ZERO_NORM) || !norm.is_finite() {
            return Err(ProjError::ZeroVector);
        }
        let mut coords = v / norm;
        if mode == Mode::Projective {
            if let Some(first) = coords.iter().find(|c| c.abs() > SIGN_TOL) {
                if *first < 0.0 {
                    coords.neg_mut();
                }
            }
        }
        Ok(Self { coords, mode })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self, ProjError> {
        Self::normalize(&DVector::from_column_slice(v))
    }

    /// Unit representative.
    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// n for a point of RP^n.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    /// Same point, viewed in the other mode.
    pub fn to_mode(&self, mode: Mode) -> Self {
        Self::with_mode(&self.coords, mode).expect("unit vector")
    }

    /// Projective equality up to `tol` in the elliptic metric.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.coords.len() == other.coords.len() && elliptic_distance(self, other) <= tol
    }
}

/// Elliptic (quotient round) distance `arccos |⟨p̂, q̂⟩|`.
pub fn elliptic_distance(p: &ProjPoint, q: &ProjPoint) -> f64 {
    let c = p.coords.dot(&q.coords).abs().min(1.0);
    // acos loses precision near 1; use the chordal form there.
    if c > 0.9 {
        let diff = (&p.coords - &q.coords).norm().min((&p.coords + &q.coords).norm());
        2.0 * (diff / 2.0).asin()
    } else {
        c.acos()
    }
}

/// Angle between two nonzero vectors of R^{n+1}, in [0, π].
pub fn vector_angle(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let (nu, nv) = (u.norm(), v.norm());
    let a = u / nu;
    let b = v / nv;
    let s = (&a - &b).norm();
    let t = (&a + &b).norm();
    2.0 * s.atan2(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MapMode {
    #[default]
    Pgl,
    /// Representative in SL_±(n+1, R).
    SlPm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjMap {
    matrix: DMatrix<f64>,
    mode: MapMode,
}

impl ProjMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, ProjError> {
        if !matrix.is_square() {
            return Err(ProjError::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if is_singular(&matrix) {
            return Err(ProjError::Singular);
        }
        Ok(Self {
            matrix,
            mode: MapMode::Pgl,
        })
    }

    /// Wraps a matrix that is already in SL_±; `|det| = 1` within 1e-12.
    pub fn new_slpm(matrix: DMatrix<f64>) -> Result<Self, ProjError> {
        let mut map = Self::new(matrix)?;
        let det = map.matrix.determinant();
        if (det.abs() - 1.0).abs() > 1e-12 {
            return Err(ProjError::NotUnimodular(det));
        }
        map.mode = MapMode::SlPm;
        Ok(map)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n + 1, n + 1),
            mode: MapMode::SlPm,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn mode(&self) -> MapMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn compose(&self, other: &ProjMap) -> ProjMap {
        let mode = if self.mode == MapMode::SlPm && other.mode == MapMode::SlPm {
            MapMode::SlPm
        } else {
            MapMode::Pgl
        };
        ProjMap {
            matrix: &self.matrix * &other.matrix,
            mode,
        }
    }

    pub fn inverse(&self) -> ProjMap {
        ProjMap {
            matrix: self
                .matrix
                .clone()
                .try_inverse()
                .expect("ProjMap is invertible by construction"),
            mode: self.mode,
        }
    }

    /// True when the two matrices are proportional (with either sign) within `tol`
    /// after scaling both to unit Frobenius norm.
    pub fn proportional_to(&self, other: &ProjMap, tol: f64) -> bool {
        matrices_proportional(&self.matrix, &other.matrix, tol)
    }
}

fn is_singular(m: &DMatrix<f64>) -> bool {
    let sv = m.singular_values();
    let max = sv.max();
    !(max > 0.0) || sv.min() <= max * 1e-14 || !max.is_finite()
}

/// Proportionality of two matrices up to a nonzero scalar.
pub fn matrices_proportional(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    if a.shape() != b.shape() {
        return false;
    }
    let an = a / a.norm();
    let bn = b / b.norm();
    (&an - &bn).norm() <= tol || (&an + &bn).norm() <= tol
}

/// Acts on a point; the mode of `p` is kept.
pub fn apply(g: &ProjMap, p: &ProjPoint) -> Result<ProjPoint, ProjError> {
    if g.matrix.ncols() != p.coords.len() {
        return Err(ProjError::DimensionMismatch {
            expected: g.matrix.ncols(),
            got: p.coords.len(),
        });
    }
    let image = &g.matrix * &p.coords;
    let out = ProjPoint::with_mode(&image, p.mode);
    debug_assert!(out.is_ok(), "invertible map sent a point to zero");
    out
}

/// Cross-ratio `(a, b, c, d)` of four collinear points.
pub fn cross_ratio(
    a: &ProjPoint,
    b: &ProjPoint,
    c: &ProjPoint,
    d: &ProjPoint,
) -> Result<f64, ProjError> {
    let dim = a.coords.len();
    for p in [b, c, d] {
        if p.coords.len() != dim {
            return Err(ProjError::DimensionMismatch {
                expected: dim,
                got: p.coords.len(),
            });
        }
    }
    let stacked = DMatrix::from_columns(&[
        a.coords.clone(),
        b.coords.clone(),
        c.coords.clone(),
        d.coords.clone(),
    ]);
    let svd = stacked.svd(true, false);
    let mut sv: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    sv.sort_by(|x, y| y.0.total_cmp(&x.0));
    if sv.len() > 2 && sv[2].0 > COLLINEAR_TOL {
        return Err(ProjError::NotCollinear(sv[2].0));
    }
    let u = svd.u.expect("requested U");
    let e1 = u.column(sv[0].1).into_owned();
    let e2 = u.column(sv[1].1).into_owned();
    let chart = |p: &ProjPoint| [p.coords.dot(&e1), p.coords.dot(&e2)];
    let (pa, pb, pc, pd) = (chart(a), chart(b), chart(c), chart(d));
    line_cross_ratio(pa, pb, pc, pd)
}

/// Cross-ratio of four points given by homogeneous coordinates on a line.
pub fn line_cross_ratio(
    a: [f64; 2],
    b: [f64; 2],
    c: [f64; 2],
    d: [f64; 2],
) -> Result<f64, ProjError> {
    let bracket = |x: [f64; 2], y: [f64; 2]| {
        let nx = x[0].hypot(x[1]);
        let ny = y[0].hypot(y[1]);
        (x[0] * y[1] - x[1] * y[0]) / (nx * ny)
    };
    let pairs = [
        bracket(a, b),
        bracket(a, c),
        bracket(a, d),
        bracket(b, c),
        bracket(b, d),
        bracket(c, d),
    ];
    if pairs.iter().any(|w| w.abs() < 1e-13) {
        return Err(ProjError::DegeneratePoints);
    }
    Ok(bracket(a, c) * bracket(b, d) / (bracket(a, d) * bracket(b, c)))
}

/// Lifts a projective map to SL_±(n+1, R) with the requested determinant sign.
///
/// For even n the sign is forced. For odd n, `M` and `−M` share a determinant;
/// the representative whose first column's first nonzero entry is positive is
/// returned.
pub fn lift_to_slpm(g: &ProjMap, orientation_reversing: bool) -> Result<ProjMap, ProjError> {
    let size = g.matrix.nrows();
    let det = g.matrix.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(ProjError::Singular);
    }
    let mut m = &g.matrix / det.abs().powf(1.0 / size as f64);
    let want = if orientation_reversing { -1.0 } else { 1.0 };
    let have = det.signum();
    if size % 2 == 1 {
        if have != want {
            m.neg_mut();
        }
    } else {
        if have != want {
            return Err(ProjError::OrientationMismatch);
        }
        let first = m.column(0).iter().copied().find(|x| x.abs() > 1e-15);
        if matches!(first, Some(x) if x < 0.0) {
            m.neg_mut();
        }
    }
    // Re-normalise away rounding in the root.
    let d = m.determinant();
    m /= d.abs().powf(1.0 / size as f64);
    Ok(ProjMap {
        matrix: m,
        mode: MapMode::SlPm,
    })
}

/// A projective line through two distinct points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjLine {
    a: ProjPoint,
    b: ProjPoint,
}

impl ProjLine {
    pub fn through(a: ProjPoint, b: ProjPoint) -> Result<Self, ProjError> {
        if a.coords.len() != b.coords.len() {
            return Err(ProjError::DimensionMismatch {
                expected: a.coords.len(),
                got: b.coords.len(),
            });
        }
        let cross = a.coords.dot(&b.coords).abs();
        if (1.0 - cross) < 1e-14 {
            return Err(ProjError::DegeneratePoints);
        }
        Ok(Self { a, b })
    }

    pub fn points(&self) -> (&ProjPoint, &ProjPoint) {
        (&self.a, &self.b)
    }

    /// Orthonormal basis `(e1, e2)` of the 2-plane spanned by the line, with
    /// `e1` the unit lift of the first spanning point.
    pub fn basis(&self) -> (DVector<f64>, DVector<f64>) {
        let e1 = self.a.coords.clone();
        let mut e2 = &self.b.coords - &e1 * e1.dot(&self.b.coords);
        e2 /= e2.norm();
        (e1, e2)
    }

    pub fn contains(&self, p: &ProjPoint, tol: f64) -> bool {
        let (e1, e2) = self.basis();
        let v = p.coords();
        let r = v - &e1 * e1.dot(v) - &e2 * e2.dot(v);
        r.norm() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn normalize_examples() {
        let p = ProjPoint::normalize(&v(&[2.0, 0.0, 0.0])).unwrap();
        assert_eq!(p.coords(), &v(&[1.0, 0.0, 0.0]));
        let p = ProjPoint::normalize(&v(&[0.0, -3.0, 0.0])).unwrap();
        assert_eq!(p.coords(), &v(&[0.0, 1.0, 0.0]));
        let p = ProjPoint::normalize(&v(&[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert!((p.coords() - v(&[0.5, 0.5, 0.5, 0.5])).norm() < 1e-15);
        let q = ProjPoint::normalize(p.coords()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn spherical_mode_keeps_sign() {
        let p = ProjPoint::spherical(&v(&[0.0, -3.0, 0.0])).unwrap();
        assert_eq!(p.coords(), &v(&[0.0, -1.0, 0.0]));
    }

    #[test]
    fn zero_vector_rejected() {
        assert_eq!(
            ProjPoint::normalize(&v(&[0.0, 0.0])),
            Err(ProjError::ZeroVector)
        );
        assert_eq!(
            ProjPoint::normalize(&v(&[1e-301, 0.0])),
            Err(ProjError::ZeroVector)
        );
    }

    #[test]
    fn apply_examples() {
        let id = ProjMap::identity(2);
        let p = ProjPoint::from_slice(&[0.3, -0.2, 1.0]).unwrap();
        assert!(apply(&id, &p).unwrap().approx_eq(&p, 1e-15));

        let g = ProjMap::new(DMatrix::from_diagonal(&v(&[2.0, 1.0, 1.0]))).unwrap();
        let e0 = ProjPoint::from_slice(&[1.0, 0.0, 0.0]).unwrap();
        assert!(apply(&g, &e0).unwrap().approx_eq(&e0, 1e-15));
        let p = ProjPoint::from_slice(&[1.0, 1.0, 0.0]).unwrap();
        let want = ProjPoint::from_slice(&[2.0, 1.0, 0.0]).unwrap();
        assert!(apply(&g, &p).unwrap().approx_eq(&want, 1e-15));
    }

    #[test]
    fn cross_ratio_chart_example() {
        let pt = |x: f64| ProjPoint::from_slice(&[1.0, x]).unwrap();
        let r = cross_ratio(&pt(0.0), &pt(3.0), &pt(1.0), &pt(2.0)).unwrap();
        assert!((r - 0.25).abs() < 1e-14);
    }

    #[test]
    fn cross_ratio_interval_calibration() {
        let pt = |x: f64| ProjPoint::from_slice(&[1.0, x]).unwrap();
        for x in [-0.7, -0.1, 0.2, 0.5, 0.93] {
            let r = cross_ratio(&pt(-1.0), &pt(1.0), &pt(x), &pt(0.0)).unwrap();
            assert!((r - (1.0 + x) / (1.0 - x)).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_ratio_errors() {
        let p = |xs: &[f64]| ProjPoint::from_slice(xs).unwrap();
        let e = cross_ratio(
            &p(&[1.0, 0.0, 0.0]),
            &p(&[0.0, 1.0, 0.0]),
            &p(&[0.0, 0.0, 1.0]),
            &p(&[1.0, 1.0, 0.0]),
        );
        assert!(matches!(e, Err(ProjError::NotCollinear(_))));
        let e = cross_ratio(
            &p(&[1.0, 0.0]),
            &p(&[-2.0, 0.0]),
            &p(&[1.0, 1.0]),
            &p(&[1.0, 2.0]),
        );
        assert_eq!(e, Err(ProjError::DegeneratePoints));
    }

    #[test]
    fn lift_examples() {
        let id = ProjMap::new(DMatrix::identity(3, 3)).unwrap();
        let l = lift_to_slpm(&id, false).unwrap();
        assert!((l.matrix() - DMatrix::<f64>::identity(3, 3)).norm() < 1e-15);

        let g = ProjMap::new(DMatrix::from_diagonal(&v(&[4.0, 1.0, 1.0, 1.0]))).unwrap();
        let l = lift_to_slpm(&g, false).unwrap();
        let s = 4f64.powf(0.25);
        let want = DMatrix::from_diagonal(&v(&[4.0 / s, 1.0 / s, 1.0 / s, 1.0 / s]));
        assert!((l.matrix() - want).norm() < 1e-14);
        assert!((l.matrix().determinant() - 1.0).abs() < 1e-12);

        let r = ProjMap::new(DMatrix::from_diagonal(&v(&[-1.0, 1.0, 1.0]))).unwrap();
        let l = lift_to_slpm(&r, true).unwrap();
        assert!((l.matrix() - r.matrix()).norm() < 1e-15);
        // n = 2: asking for det +1 flips the sign.
        let l = lift_to_slpm(&r, false).unwrap();
        assert!((l.matrix().determinant() - 1.0).abs() < 1e-12);
        assert!(l.proportional_to(&r, 1e-14));
    }

    #[test]
    fn lift_odd_dimension_rejects_wrong_orientation() {
        let g = ProjMap::new(DMatrix::from_diagonal(&v(&[-1.0, 1.0, 1.0, 1.0]))).unwrap();
        assert_eq!(lift_to_slpm(&g, false), Err(ProjError::OrientationMismatch));
        assert!(lift_to_slpm(&g, true).is_ok());
    }

    #[test]
    fn singular_map_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(ProjMap::new(m), Err(ProjError::Singular));
    }
}
