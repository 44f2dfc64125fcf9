//! Affine suspension of a projective structure.
//!
//! A point `x` of S^n together with a radius `t > 0` corresponds to the vector
//! `t·x̂` of R^{n+1} \ {0}. A deck transformation with lifted matrix `M` acts by
//! `(x, t) ↦ (M x, ‖M (t x̂)‖)` and the dilation by `(x, t) ↦ (x, s·t)`.

use crate::projective::{apply, Mode, ProjError, ProjMap, ProjPoint};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuspensionError {
    #[error("radial parameter must be positive, got {0}")]
    NonpositiveParameter(f64),
    #[error("unknown generator {0:?}")]
    UnknownGenerator(String),
    #[error("generator {0:?} has a translation part; the action is not radiant")]
    NotRadiant(String),
    #[error("generator {0:?} is not in SL_±")]
    NotUnimodular(String),
    #[error("dilation factor must exceed 1, got {0}")]
    InvalidDilation(f64),
    #[error(transparent)]
    Projective(#[from] ProjError),
}

/// Affine map `y ↦ L y + b` of R^{n+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub linear: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl AffineMap {
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.linear * y + &self.translation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuspensionCtx {
    base_dim: usize,
    generators: BTreeMap<String, AffineMap>,
    dilation: f64,
}

impl SuspensionCtx {
    /// Suspension of lifted holonomy generators; every matrix must have
    /// determinant ±1 within 1e-12.
    pub fn new(
        base_dim: usize,
        holonomy_lift: impl IntoIterator<Item = (String, ProjMap)>,
        dilation: f64,
    ) -> Result<Self, SuspensionError> {
        if !(dilation > 1.0) {
            return Err(SuspensionError::InvalidDilation(dilation));
        }
        let mut generators = BTreeMap::new();
        for (name, g) in holonomy_lift {
            if g.dim() != base_dim {
                return Err(ProjError::DimensionMismatch {
                    expected: base_dim,
                    got: g.dim(),
                }
                .into());
            }
            let det = g.matrix().determinant();
            if (det.abs() - 1.0).abs() > 1e-12 {
                return Err(SuspensionError::NotUnimodular(name));
            }
            generators.insert(
                name,
                AffineMap {
                    linear: g.matrix().clone(),
                    translation: DVector::zeros(base_dim + 1),
                },
            );
        }
        Ok(Self {
            base_dim,
            generators,
            dilation,
        })
    }

    /// Replaces (or adds) a generator by an arbitrary affine map.
    pub fn with_affine_generator(mut self, name: &str, map: AffineMap) -> Self {
        self.generators.insert(name.to_string(), map);
        self
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn dilation_factor(&self) -> f64 {
        self.dilation
    }

    pub fn generator_names(&self) -> impl Iterator<Item = &str> {
        self.generators.keys().map(String::as_str)
    }

    fn generator(&self, name: &str) -> Result<&AffineMap, SuspensionError> {
        self.generators
            .get(name)
            .ok_or_else(|| SuspensionError::UnknownGenerator(name.to_string()))
    }

    /// Action of a generator on `(p, t)`.
    pub fn suspend_deck(
        &self,
        g_name: &str,
        p: &ProjPoint,
        t: f64,
    ) -> Result<(ProjPoint, f64), SuspensionError> {
        let g = self.generator(g_name)?;
        let y = g.apply(&suspend_point(p, t)?);
        let r = y.norm();
        Ok((ProjPoint::spherical(&y)?, r))
    }

    /// Action of a word (applied right to left, as a matrix product).
    pub fn suspend_word(
        &self,
        word: &[&str],
        p: &ProjPoint,
        t: f64,
    ) -> Result<(ProjPoint, f64), SuspensionError> {
        let mut state = (p.to_mode(Mode::Spherical), t);
        for name in word.iter().rev() {
            state = self.suspend_deck(name, &state.0, state.1)?;
        }
        Ok(state)
    }

    /// The dilation `(p, t) ↦ (p, s·t)`.
    pub fn dilate(&self, p: &ProjPoint, t: f64) -> Result<(ProjPoint, f64), SuspensionError> {
        if !(t > 0.0) {
            return Err(SuspensionError::NonpositiveParameter(t));
        }
        Ok((p.to_mode(Mode::Spherical), self.dilation * t))
    }

    /// Returns the origin after checking that every suspended generator and
    /// the dilation fix it.
    pub fn is_radiant_fixed_point(&self) -> Result<DVector<f64>, SuspensionError> {
        let origin = DVector::zeros(self.base_dim + 1);
        for (name, g) in &self.generators {
            if g.apply(&origin).norm() > 1e-12 {
                return Err(SuspensionError::NotRadiant(name.clone()));
            }
        }
        Ok(origin)
    }
}

/// `(p, t) ↦ t·p̂` with `p̂` the unit representative of `p`.
pub fn suspend_point(p: &ProjPoint, t: f64) -> Result<DVector<f64>, SuspensionError> {
    if !(t > 0.0) {
        return Err(SuspensionError::NonpositiveParameter(t));
    }
    Ok(p.coords() / p.coords().norm() * t)
}

/// Radial projection of a nonzero vector back to S^n.
pub fn radial_projection(y: &DVector<f64>) -> Result<ProjPoint, SuspensionError> {
    Ok(ProjPoint::spherical(y)?)
}

/// Projective action of a map on the base, for comparison with the
/// suspended action.
pub fn base_action(g: &ProjMap, p: &ProjPoint) -> Result<ProjPoint, SuspensionError> {
    Ok(apply(g, &p.to_mode(Mode::Spherical))?)
}
