//! Hilbert metric on a properly convex domain.
//!
//! Points on the projective line through `p` and `q` are parametrised by the
//! angle `θ` in the plane they span, `x(θ) = cos θ·p̂ + sin θ·e₂`. In this
//! parametrisation the 2×2 bracket of two points is `sin(θ_b − θ_a)`, so the
//! cross-ratio needs no affine chart.

use crate::convex::{ConvexBody, ConvexError, ConvexityVerdict};
use crate::projective::{vector_angle, ProjError, ProjLine, ProjPoint};
use nalgebra::DVector;
use std::f64::consts::PI;
use thiserror::Error;

/// Bisection iterations for chord endpoints.
pub const BISECTION_STEPS: usize = 200;
/// Interior margin required of query points.
pub const INTERIOR_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("domain is not properly convex")]
    NotProperlyConvex,
    #[error("point lies outside the domain (margin {0:.3e})")]
    PointOutsideDomain(f64),
    #[error("chord does not leave the domain; body is malformed")]
    DegenerateChord,
    #[error("line misses the domain")]
    LineMissesDomain,
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error(transparent)]
    Projective(#[from] ProjError),
}

/// A properly convex domain prepared for Hilbert-metric queries.
#[derive(Debug, Clone)]
pub struct HilbertCtx {
    body: ConvexBody,
}

impl HilbertCtx {
    pub fn new(body: ConvexBody) -> Result<Self, HilbertError> {
        if body.properly_convex_check() != ConvexityVerdict::ProperlyConvex {
            return Err(HilbertError::NotProperlyConvex);
        }
        Ok(Self { body })
    }

    pub fn body(&self) -> &ConvexBody {
        &self.body
    }

    fn interior_lift(&self, p: &ProjPoint) -> Result<DVector<f64>, HilbertError> {
        let u = self.body.orient(p.coords());
        let m = self.body.margin(&u);
        if m <= INTERIOR_TOL {
            return Err(HilbertError::PointOutsideDomain(m));
        }
        Ok(u)
    }

    /// Largest `θ` in `[inside, outside]` (or the reverse) still in the body.
    fn boundary_angle(
        &self,
        e1: &DVector<f64>,
        e2: &DVector<f64>,
        inside: f64,
        outside: f64,
    ) -> Result<f64, HilbertError> {
        let at = |t: f64| self.body.margin(&(e1 * t.cos() + e2 * t.sin()));
        if at(outside) > 0.0 {
            return Err(HilbertError::DegenerateChord);
        }
        let (mut a, mut b) = (inside, outside);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (a + b);
            if mid == a || mid == b {
                break;
            }
            if at(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Angles `(θ_o, θ_q, θ_s)` of the chord through `p` (at θ = 0) and `q`,
    /// with `o` beyond `p` and `s` beyond `q`, plus the plane basis.
    fn chord(
        &self,
        u: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<(f64, f64, f64, DVector<f64>), HilbertError> {
        let perp = w - u * u.dot(w);
        let e2 = &perp / perp.norm();
        let theta_q = vector_angle(u, w);
        let theta_s = self.boundary_angle(u, &e2, theta_q, PI)?;
        let theta_o = self.boundary_angle(u, &e2, 0.0, theta_q - PI)?;
        Ok((theta_o, theta_q, theta_s, e2))
    }

    /// Endpoints `(o, s)` of the maximal segment through `p` and `q`.
    pub fn chord_endpoints(
        &self,
        p: &ProjPoint,
        q: &ProjPoint,
    ) -> Result<(ProjPoint, ProjPoint), HilbertError> {
        let u = self.interior_lift(p)?;
        let w = self.interior_lift(q)?;
        if vector_angle(&u, &w) < 1e-15 {
            return Err(ProjError::DegeneratePoints.into());
        }
        let (o, _, s, e2) = self.chord(&u, &w)?;
        let point = |t: f64| ProjPoint::normalize(&(&u * t.cos() + &e2 * t.sin()));
        Ok((point(o)?, point(s)?))
    }

    /// `d(p, q) = log (o, s, q, p)`.
    pub fn hilbert_distance(&self, p: &ProjPoint, q: &ProjPoint) -> Result<f64, HilbertError> {
        let u = self.interior_lift(p)?;
        let w = self.interior_lift(q)?;
        if vector_angle(&u, &w) < 1e-15 {
            return Ok(0.0);
        }
        let (o, tq, s, _) = self.chord(&u, &w)?;
        Ok(log_cross_ratio(o, s, tq, 0.0))
    }

    /// A point of `line` nearest to `x`; for non-unique feet, the midpoint of
    /// the minimising interval. Returns the foot and the distance.
    pub fn foot_of_perpendicular(
        &self,
        x: &ProjPoint,
        line: &ProjLine,
    ) -> Result<(ProjPoint, f64), HilbertError> {
        let xu = self.interior_lift(x)?;
        let (a, b) = line.basis();
        let point = |t: f64| &a * t.cos() + &b * t.sin();
        let margin = |t: f64| self.body.margin(&self.body.orient(&point(t)));
        let (lo, hi) = self.line_interval(&margin)?;
        let xp = ProjPoint::normalize(&xu)?;
        let dist = |t: f64| {
            let y = ProjPoint::normalize(&point(t)).expect("unit combination");
            self.hilbert_distance(&xp, &y).unwrap_or(f64::INFINITY)
        };
        if line.contains(&xp, 1e-12) {
            return Ok((xp, 0.0));
        }
        // The distance to a line is convex in arclength, hence unimodal in θ.
        let span = hi - lo;
        let (mut l, mut r) = (lo + 1e-9 * span, hi - 1e-9 * span);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut m1 = r - g * (r - l);
        let mut m2 = l + g * (r - l);
        let (mut f1, mut f2) = (dist(m1), dist(m2));
        for _ in 0..BISECTION_STEPS {
            if r - l < 1e-15 {
                break;
            }
            if f1 <= f2 {
                r = m2;
                m2 = m1;
                f2 = f1;
                m1 = r - g * (r - l);
                f1 = dist(m1);
            } else {
                l = m1;
                m1 = m2;
                f1 = f2;
                m2 = l + g * (r - l);
                f2 = dist(m2);
            }
        }
        let t_min = 0.5 * (l + r);
        let f_min = dist(t_min);
        let level = f_min + 1e-8;
        // Extend to the ends of the sublevel interval.
        let edge = |from: f64, to: f64| {
            let (mut a, mut b) = (from, to);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (a + b);
                if mid == a || mid == b {
                    break;
                }
                if dist(mid) <= level {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            a
        };
        let left = edge(t_min, lo);
        let right = edge(t_min, hi);
        let t_foot = 0.5 * (left + right);
        let foot = ProjPoint::normalize(&point(t_foot))?;
        Ok((foot, dist(t_foot).min(f_min)))
    }

    /// Angle interval `(lo, hi)` of the line inside the body, `hi − lo < π`.
    fn line_interval(&self, margin: &dyn Fn(f64) -> f64) -> Result<(f64, f64), HilbertError> {
        const GRID: usize = 720;
        let start = (0..GRID)
            .map(|k| PI * k as f64 / GRID as f64)
            .map(|t| (t, margin(t)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty grid");
        if start.1 <= INTERIOR_TOL {
            return Err(HilbertError::LineMissesDomain);
        }
        let t0 = start.0;
        let bisect = |outside: f64| {
            let (mut a, mut b) = (t0, outside);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (a + b);
                if mid == a || mid == b {
                    break;
                }
                if margin(mid) > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            a
        };
        // A properly convex body meets each line in less than a half-turn,
        // so some outside angle lies within π on either side.
        let step = PI / GRID as f64;
        let mut out_hi = None;
        let mut out_lo = None;
        for k in 1..=GRID {
            let t = t0 + step * k as f64;
            if out_hi.is_none() && margin(t) <= 0.0 {
                out_hi = Some(t);
            }
            let t = t0 - step * k as f64;
            if out_lo.is_none() && margin(t) <= 0.0 {
                out_lo = Some(t);
            }
        }
        let (Some(oh), Some(ol)) = (out_hi, out_lo) else {
            return Err(HilbertError::DegenerateChord);
        };
        Ok((bisect(ol), bisect(oh)))
    }
}

/// `log (o, s, q, p)` for angles on one line, brackets `[a, b] = sin(b − a)`.
fn log_cross_ratio(o: f64, s: f64, q: f64, p: f64) -> f64 {
    let br = |a: f64, b: f64| (b - a).sin();
    let value = (br(o, q) * br(s, p)) / (br(o, p) * br(s, q));
    value.ln().max(0.0)
}
