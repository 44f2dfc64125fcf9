//! Koszul–Vinberg characteristic function of a properly convex cone.
//!
//! `f(x) = ∫_{V*} e^{−φ(x)} dφ` is factorised over rays of the dual cone
//! through the section `S = {ψ ∈ V* : ψ(x₀) = 1}`:
//!
//! `f(x) = h · n! · ∫_S ψ(x)^{−(n+1)} dσ(ψ)`, with `h = 1/‖x₀‖`
//!
//! the distance from the origin to the section hyperplane. The section is
//! sampled once (uniformly in a bounding box, by rejection) and the accepted
//! points are reused for every evaluation, so all evaluations share their
//! Monte-Carlo noise. In particular `f(tx) = t^{−(n+1)} f(x)` holds exactly.

use crate::convex::{complement_basis, hausdorff_distance, Cone, ConvexError};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Default number of section samples.
pub const DEFAULT_SAMPLES: usize = 1_000_000;
/// Samples per independent random stream.
const CHUNK: usize = 1 << 16;
/// Relative finite-difference step.
pub const FD_STEP: f64 = 1e-3;
/// Boundary samples used to bound a non-polyhedral section.
const SECTION_BOUNDARY_SAMPLES: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KvError {
    #[error("point lies outside the cone")]
    OutsideCone,
    #[error("cross-section of the dual cone is unbounded")]
    DualUnbounded,
    #[error("ambient dimension must be at least 2")]
    TooSmall,
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

/// Monte-Carlo estimator of the Koszul–Vinberg function of a cone.
#[derive(Debug, Clone)]
pub struct KvContext {
    cone: Cone,
    dual: Cone,
    section_normal: DVector<f64>,
    seed: u64,
    n_samples: usize,
    /// Accepted section points, row-major with stride `dim`.
    accepted: Vec<f64>,
    /// `h · n! · box volume / N`.
    scale: f64,
}

impl KvContext {
    /// Section through the cone's default interior point.
    pub fn new(cone: Cone, n_samples: usize, seed: u64) -> Result<Self, KvError> {
        let x0 = cone.interior_point();
        Self::with_section(cone, x0, n_samples, seed)
    }

    pub fn with_section(
        cone: Cone,
        section_normal: DVector<f64>,
        n_samples: usize,
        seed: u64,
    ) -> Result<Self, KvError> {
        let dim = cone.ambient();
        if dim < 2 {
            return Err(KvError::TooSmall);
        }
        if !cone.contains(&section_normal) {
            return Err(KvError::DualUnbounded);
        }
        let dual = cone.dual()?;
        let x0 = section_normal;
        let center = &x0 / x0.norm_squared();
        let basis = complement_basis(&x0);
        let n = dim - 1;

        // Bounding box of the section in the basis coordinates.
        let (boundary, exact) = match &dual {
            Cone::Polyhedral(_) => (dual.sample_generators(0), true),
            Cone::Lorentz { .. } => (dual.sample_generators(SECTION_BOUNDARY_SAMPLES), false),
        };
        let mut lo = DVector::from_element(n, f64::INFINITY);
        let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
        for g in &boundary {
            let pairing = g.dot(&x0);
            if pairing <= 1e-12 {
                return Err(KvError::DualUnbounded);
            }
            let y = basis.transpose() * (g / pairing - &center);
            lo = lo.inf(&y);
            hi = hi.sup(&y);
        }
        if !exact {
            let pad = (&hi - &lo) * 0.02;
            lo -= &pad;
            hi += pad;
        }
        let width = &hi - &lo;
        let volume: f64 = width.iter().product();

        let membership = DualMembership::new(&cone, &dual);
        let chunks = n_samples.div_ceil(CHUNK);
        let per_chunk: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64);
                let count = CHUNK.min(n_samples - c * CHUNK);
                let mut out = Vec::new();
                let mut y = DVector::zeros(n);
                for _ in 0..count {
                    for k in 0..n {
                        y[k] = lo[k] + width[k] * rng.random::<f64>();
                    }
                    let psi = &center + &basis * &y;
                    if membership.contains(&psi) {
                        out.extend(psi.iter());
                    }
                }
                out
            })
            .collect();
        let accepted = per_chunk.concat();
        let factorial: f64 = (1..=n).map(|k| k as f64).product();
        let scale = factorial / x0.norm() * volume / n_samples as f64;
        Ok(Self {
            cone,
            dual,
            section_normal: x0,
            seed,
            n_samples,
            accepted,
            scale,
        })
    }

    pub fn cone(&self) -> &Cone {
        &self.cone
    }

    pub fn dual(&self) -> &Cone {
        &self.dual
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn section_normal(&self) -> &DVector<f64> {
        &self.section_normal
    }

    pub fn dim(&self) -> usize {
        self.cone.ambient()
    }

    /// Accepted section points `ψ` (each of length `dim`) and the weight
    /// `h · n! · vol / N` attached to each.
    pub fn section_samples(&self) -> (Vec<DVector<f64>>, f64) {
        let d = self.dim();
        let pts = self
            .accepted
            .chunks_exact(d)
            .map(DVector::from_column_slice)
            .collect();
        (pts, self.scale)
    }

    /// Estimator without the membership check.
    fn estimate(&self, x: &DVector<f64>) -> f64 {
        let d = self.dim();
        let power = d as i32;
        let sums: Vec<f64> = self
            .accepted
            .par_chunks(CHUNK * d)
            .map(|block| {
                block
                    .chunks_exact(d)
                    .map(|psi| {
                        let v: f64 = psi.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                        v.powi(-power)
                    })
                    .sum::<f64>()
            })
            .collect();
        self.scale * sums.iter().sum::<f64>()
    }

    /// Koszul–Vinberg function at `x`.
    pub fn kv_value(&self, x: &DVector<f64>) -> Result<f64, KvError> {
        if x.len() != self.dim() || !self.cone.contains(x) {
            return Err(KvError::OutsideCone);
        }
        Ok(self.estimate(x))
    }

    /// Central-difference Hessian of `log f` with step `1e-3·‖x‖`.
    pub fn kv_log_hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, KvError> {
        let d = self.dim();
        let h = FD_STEP * x.norm();
        let offsets = |i: usize, si: f64, j: usize, sj: f64| {
            let mut y = x.clone();
            y[i] += si * h;
            y[j] += sj * h;
            y
        };
        for i in 0..d {
            for s in [-1.0, 1.0] {
                for j in 0..d {
                    for t in [-1.0, 1.0] {
                        if !self.cone.contains(&offsets(i, s, j, t)) {
                            return Err(KvError::OutsideCone);
                        }
                    }
                }
            }
        }
        let log_f = |y: &DVector<f64>| self.estimate(y).ln();
        let center = log_f(x);
        let mut hess = DMatrix::zeros(d, d);
        for i in 0..d {
            let mut plus = x.clone();
            plus[i] += h;
            let mut minus = x.clone();
            minus[i] -= h;
            hess[(i, i)] = (log_f(&plus) - 2.0 * center + log_f(&minus)) / (h * h);
            for j in i + 1..d {
                let v = (log_f(&offsets(i, 1.0, j, 1.0)) - log_f(&offsets(i, 1.0, j, -1.0))
                    - log_f(&offsets(i, -1.0, j, 1.0))
                    + log_f(&offsets(i, -1.0, j, -1.0)))
                    / (4.0 * h * h);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        Ok(hess)
    }

    /// Central-difference gradient of `f` with step `1e-3·‖x‖`.
    pub fn kv_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>, KvError> {
        let h = FD_STEP * x.norm();
        let mut grad = DVector::zeros(self.dim());
        for i in 0..self.dim() {
            let mut plus = x.clone();
            plus[i] += h;
            let mut minus = x.clone();
            minus[i] -= h;
            grad[i] = (self.kv_value(&plus)? - self.kv_value(&minus)?) / (2.0 * h);
        }
        Ok(grad)
    }

    /// Minimum log-Hessian eigenvalue at each point.
    pub fn hessian_positivity_check(
        &self,
        xs: &[DVector<f64>],
    ) -> Result<PositivityReport, KvError> {
        let min_eigenvalues = xs
            .iter()
            .map(|x| {
                let hess = self.kv_log_hessian(x)?;
                Ok(hess.symmetric_eigenvalues().min())
            })
            .collect::<Result<Vec<f64>, KvError>>()?;
        let all_positive = min_eigenvalues.iter().all(|&e| e > 0.0);
        Ok(PositivityReport {
            min_eigenvalues,
            all_positive,
        })
    }
}

/// Closed membership test for the dual cone.
enum DualMembership {
    /// `ψ ∈ V*` iff `ψ · g ≥ 0` for every generator `g` of `V`.
    Polyhedral(Vec<DVector<f64>>),
    /// `ψ = N z` with `z₀ ≥ ‖z'‖`; stores `N^{-1}`.
    Lorentz(DMatrix<f64>),
}

impl DualMembership {
    fn new(cone: &Cone, dual: &Cone) -> Self {
        match (cone, dual) {
            (Cone::Polyhedral(p), _) => DualMembership::Polyhedral(p.generators()),
            (_, Cone::Lorentz { map }) => DualMembership::Lorentz(
                map.clone().try_inverse().expect("dual map is invertible"),
            ),
            _ => unreachable!("Lorentz cones dualise to Lorentz cones"),
        }
    }

    fn contains(&self, psi: &DVector<f64>) -> bool {
        match self {
            DualMembership::Polyhedral(gens) => gens.iter().all(|g| g.dot(psi) >= 0.0),
            DualMembership::Lorentz(inv) => {
                let z = inv * psi;
                z[0] >= z.rows(1, z.len() - 1).norm()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub min_eigenvalues: Vec<f64>,
    pub all_positive: bool,
}

/// Differences between two Koszul–Vinberg functions near a common point.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    /// max |f₁ − f₂| over the probe points.
    pub value_delta: f64,
    /// max ‖∇f₁ − ∇f₂‖ over the probe points.
    pub gradient_delta: f64,
    /// Elliptic Hausdorff distance between the projectivised cones.
    pub hausdorff: f64,
}

impl PerturbationReport {
    pub fn delta(&self) -> f64 {
        self.value_delta.max(self.gradient_delta)
    }
}

/// Compares `f₁` and `f₂` (values and finite-difference gradients) at `x`
/// and at the `2(n+1)` axis points at relative radius `1e-2`.
pub fn kv_perturbation_delta(
    ctx1: &KvContext,
    ctx2: &KvContext,
    x: &DVector<f64>,
) -> Result<PerturbationReport, KvError> {
    let r = 1e-2 * x.norm();
    let mut probes = vec![x.clone()];
    for i in 0..x.len() {
        for s in [-1.0, 1.0] {
            let mut y = x.clone();
            y[i] += s * r;
            probes.push(y);
        }
    }
    let mut value_delta = 0.0f64;
    let mut gradient_delta = 0.0f64;
    for y in &probes {
        value_delta = value_delta.max((ctx1.kv_value(y)? - ctx2.kv_value(y)?).abs());
        gradient_delta = gradient_delta.max((ctx1.kv_gradient(y)? - ctx2.kv_gradient(y)?).norm());
    }
    let b1 = ctx1.cone.to_body(8)?;
    let b2 = ctx2.cone.to_body(8)?;
    let hausdorff = hausdorff_distance(&b1, &b2)?;
    Ok(PerturbationReport {
        value_delta,
        gradient_delta,
        hausdorff,
    })
}
