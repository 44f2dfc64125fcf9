//! Developing maps of triangulated projective 3-orbifolds.
//!
//! A placed simplex is a 4×4 matrix `X` whose columns are lifts of its
//! vertices. Crossing face `k_a` of simplex `a` into simplex `b` places `b` at
//! `X_b = X_a G`, where the pasting matrix `G` has column `π(i)` equal to
//! `d_i e_i` for each shared vertex `i` and column `k_b` equal to the apex
//! `q` (the free vertex of `b` in `a`'s frame). The reverse crossing uses
//! `G⁻¹`. Every placement is deduplicated by its projective vertex set.

use crate::convex::{hull_facets, max_pairwise_angle, BodyJson, ConvexBody, ConvexError};
use crate::coxeter::CoxeterSystem;
use crate::dedup::ApproxKeySet;
use crate::lp;
use crate::projective::{ProjError, ProjMap, ProjPoint};
use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};
use thiserror::Error;

/// Default chord margin ε₀.
pub const DEFAULT_EPS0: f64 = 0.1;
/// Default cap on placed simplices.
pub const DEFAULT_PLACEMENT_CAP: usize = 100_000;
/// Grid for projective vertex-set deduplication.
pub const PLACEMENT_GRID: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DevmapError {
    #[error("zero cross-ratio in pairing {0}: the data are not holographic")]
    ZeroCrossRatio(usize),
    #[error("placed simplex is flat (volume {0:.3e})")]
    DegeneratePlacement(f64),
    #[error("development exceeds {0} simplices")]
    ExplosionGuard(usize),
    #[error("invalid gluing data: {0}")]
    InvalidGluing(String),
    #[error("generator {0} does not fix the end vertex (residual {1:.3e})")]
    VertexNotFixed(usize, f64),
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error(transparent)]
    Projective(#[from] ProjError),
}

/// Data fixing a pasting map across one face pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PastingInvariants {
    /// Scale factors of the three shared vertices, in increasing order of
    /// their index in the first simplex.
    pub face_multipliers: [f64; 3],
    /// Free vertex of the second simplex in the first simplex's frame.
    pub apex: [f64; 4],
}

/// Face `face_a` of simplex `a` glued to face `face_b` of simplex `b`;
/// vertex `i` of `a` goes to vertex `perm[i]` of `b` (`perm[face_a] = face_b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacePairing {
    pub a: usize,
    pub face_a: usize,
    pub b: usize,
    pub face_b: usize,
    pub perm: [usize; 4],
    pub invariants: PastingInvariants,
}

impl FacePairing {
    /// Pasting matrix for the crossing `a → b`.
    pub fn pasting_matrix(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(4, 4);
        let mut k = 0;
        for i in 0..4 {
            if i == self.face_a {
                continue;
            }
            g[(i, self.perm[i])] = self.invariants.face_multipliers[k];
            k += 1;
        }
        g.set_column(self.face_b, &DVector::from_column_slice(&self.invariants.apex));
        g
    }
}

/// Order of the edge through vertices `vertices` of `simplex`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeOrder {
    pub simplex: usize,
    pub vertices: (usize, usize),
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingData {
    /// Vertex labels of each tetrahedron.
    pub simplices: Vec<[String; 4]>,
    pub pairings: Vec<FacePairing>,
    #[serde(default)]
    pub edge_orders: Vec<EdgeOrder>,
}

/// Where a crossing through `(simplex, face)` leads.
#[derive(Debug, Clone)]
struct Crossing {
    pairing: usize,
    forward: bool,
    target: usize,
    target_face: usize,
    /// Vertex map from this simplex to the target.
    perm: [usize; 4],
    matrix: DMatrix<f64>,
}

impl GluingData {
    /// Checks indices, permutations, involutivity and nonzero invariants.
    pub fn validate(&self) -> Result<(), DevmapError> {
        let n = self.simplices.len();
        let mut used = BTreeSet::new();
        for (idx, p) in self.pairings.iter().enumerate() {
            if p.a >= n || p.b >= n || p.face_a > 3 || p.face_b > 3 {
                return Err(DevmapError::InvalidGluing(format!("pairing {idx} index out of range")));
            }
            let mut seen = [false; 4];
            for &j in &p.perm {
                if j > 3 || seen[j] {
                    return Err(DevmapError::InvalidGluing(format!("pairing {idx} perm is not a bijection")));
                }
                seen[j] = true;
            }
            if p.perm[p.face_a] != p.face_b {
                return Err(DevmapError::InvalidGluing(format!("pairing {idx} perm must send face to face")));
            }
            if (p.a, p.face_a) == (p.b, p.face_b) {
                return Err(DevmapError::InvalidGluing(format!("pairing {idx} glues a face to itself")));
            }
            for side in [(p.a, p.face_a), (p.b, p.face_b)] {
                if !used.insert(side) {
                    return Err(DevmapError::InvalidGluing(format!(
                        "face {} of simplex {} is paired twice",
                        side.1, side.0
                    )));
                }
            }
            let inv = &p.invariants;
            if inv.face_multipliers.iter().any(|d| d.abs() < 1e-300 || !d.is_finite())
                || inv.apex[p.face_a].abs() < 1e-300
                || inv.apex.iter().any(|x| !x.is_finite())
            {
                return Err(DevmapError::ZeroCrossRatio(idx));
            }
        }
        for e in &self.edge_orders {
            if e.simplex >= n || e.vertices.0 > 3 || e.vertices.1 > 3 || e.vertices.0 == e.vertices.1 {
                return Err(DevmapError::InvalidGluing("edge order index out of range".into()));
            }
        }
        Ok(())
    }

    fn crossings(&self) -> HashMap<(usize, usize), Crossing> {
        let mut out = HashMap::new();
        for (idx, p) in self.pairings.iter().enumerate() {
            let g = p.pasting_matrix();
            let inv = g.clone().try_inverse().expect("validated pairing is invertible");
            let mut back = [0usize; 4];
            for i in 0..4 {
                back[p.perm[i]] = i;
            }
            out.insert(
                (p.a, p.face_a),
                Crossing {
                    pairing: idx,
                    forward: true,
                    target: p.b,
                    target_face: p.face_b,
                    perm: p.perm,
                    matrix: g,
                },
            );
            out.insert(
                (p.b, p.face_b),
                Crossing {
                    pairing: idx,
                    forward: false,
                    target: p.a,
                    target_face: p.face_a,
                    perm: back,
                    matrix: inv,
                },
            );
        }
        out
    }

    /// Product of pasting matrices around the edge `{u, v}` of `simplex`,
    /// starting through the face opposite the smaller remaining vertex.
    /// `None` if the walk hits an unpaired face.
    pub fn edge_cycle(&self, simplex: usize, u: usize, v: usize) -> Option<DMatrix<f64>> {
        let crossings = self.crossings();
        let others: Vec<usize> = (0..4).filter(|&w| w != u && w != v).collect();
        let start = (simplex, others[0], (u.min(v), u.max(v)));
        let mut state = start;
        let mut m = DMatrix::identity(4, 4);
        for _ in 0..=4 * 6 * self.simplices.len() {
            let (s, exit, (a, b)) = state;
            let c = crossings.get(&(s, exit))?;
            m = &m * &c.matrix;
            let (pa, pb) = (c.perm[a], c.perm[b]);
            let next_exit = (0..4)
                .find(|&w| w != pa && w != pb && w != c.target_face)
                .expect("a tetrahedron has two faces at each edge");
            state = (c.target, next_exit, (pa.min(pb), pa.max(pb)));
            if state == start {
                return Some(m);
            }
        }
        None
    }
}

/// One placed copy of an abstract simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedSimplex {
    pub simplex: usize,
    /// Columns are vertex lifts in the simplex's own vertex order.
    pub matrix: DMatrix<f64>,
    /// Crossed pairings; a trailing `'` marks a reverse crossing.
    pub word: Vec<String>,
    pub depth: usize,
    /// Placement it was reached from, and through which of its faces.
    pub parent: Option<(usize, usize)>,
}

impl PlacedSimplex {
    pub fn vertex(&self, k: usize) -> DVector<f64> {
        self.matrix.column(k).into_owned()
    }

    pub fn word_string(&self) -> String {
        self.word.join(" ")
    }
}

#[derive(Debug, Clone)]
pub struct HolonomyGenerator {
    pub pairing: usize,
    pub map: ProjMap,
}

#[derive(Debug, Clone)]
pub struct DevelopedComplex {
    pub placed: Vec<PlacedSimplex>,
    /// Indices of the depth-0 placements, one per abstract simplex.
    pub seeds: Vec<usize>,
    pub holonomy: Vec<HolonomyGenerator>,
}

fn unit(v: &DVector<f64>) -> DVector<f64> {
    v / v.norm()
}

fn placement_key(x: &DMatrix<f64>) -> Vec<f64> {
    let mut cols: Vec<DVector<f64>> = (0..x.ncols())
        .map(|k| ProjPoint::normalize(&x.column(k).into_owned()).map(|p| p.coords().clone()))
        .collect::<Result<_, _>>()
        .unwrap_or_default();
    cols.sort_by_key(|c| c.iter().map(|x| (x * 1e6).round() as i64).collect::<Vec<_>>());
    cols.iter().flat_map(|c| c.iter().copied()).collect()
}

fn normalized_volume(x: &DMatrix<f64>) -> f64 {
    let mut y = x.clone();
    for mut c in y.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    y.determinant().abs()
}

impl DevelopedComplex {
    /// A complex of given simplices, all at depth 0 (for checks on
    /// hand-made configurations).
    pub fn from_simplices(matrices: Vec<DMatrix<f64>>) -> Self {
        let placed: Vec<PlacedSimplex> = matrices
            .into_iter()
            .enumerate()
            .map(|(i, m)| PlacedSimplex {
                simplex: i,
                matrix: m,
                word: vec![],
                depth: 0,
                parent: None,
            })
            .collect();
        let seeds = (0..placed.len()).collect();
        Self {
            placed,
            seeds,
            holonomy: vec![],
        }
    }

    pub fn max_depth(&self) -> usize {
        self.placed.iter().map(|p| p.depth).max().unwrap_or(0)
    }

    /// Distinct vertices as unit lifts, in first-seen order.
    pub fn vertices(&self) -> Vec<DVector<f64>> {
        let mut set = ApproxKeySet::new(1e-9);
        let mut out = Vec::new();
        for p in &self.placed {
            for k in 0..4 {
                let v = unit(&p.vertex(k));
                let key = ProjPoint::normalize(&v).expect("nonzero").coords().clone();
                if set.insert(key.as_slice()) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Largest mismatch between a child's shared vertices and its parent's
    /// (projective, unit-normalised).
    pub fn max_facet_mismatch(&self) -> f64 {
        let mut worst = 0.0f64;
        for p in &self.placed {
            let Some((parent, face)) = p.parent else {
                continue;
            };
            let q = &self.placed[parent];
            for i in 0..4 {
                if i == face {
                    continue;
                }
                let a = unit(&q.vertex(i));
                let best = (0..4)
                    .map(|k| {
                        let b = unit(&p.vertex(k));
                        (&a - &b).norm().min((&a + &b).norm())
                    })
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(best);
            }
        }
        worst
    }

    /// A functional positive on every vertex lift, with its margin.
    pub fn chart(&self) -> Option<(DVector<f64>, f64)> {
        let rows: Vec<DVector<f64>> = self.vertices();
        let (phi, t) = lp::max_min_margin(4, &rows, &[])?;
        (t > 1e-12).then(|| (unit(&phi), t / phi.norm()))
    }

    fn chart_normalized(&self, phi: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.placed
            .iter()
            .map(|p| {
                let mut m = p.matrix.clone();
                for mut c in m.column_iter_mut() {
                    let s = phi.dot(&c.clone_owned());
                    c /= s;
                }
                m
            })
            .collect()
    }
}

/// Develops the gluing data breadth first to `depth_max` crossings beyond
/// the seeds.
pub fn develop(
    data: &GluingData,
    depth_max: usize,
    cap: usize,
) -> Result<DevelopedComplex, DevmapError> {
    data.validate()?;
    if data.simplices.is_empty() {
        return Err(DevmapError::InvalidGluing("no simplices".into()));
    }
    let crossings = data.crossings();
    let n = data.simplices.len();

    // Spanning tree of the dual graph: reference placements.
    let mut reference: Vec<Option<DMatrix<f64>>> = vec![None; n];
    let mut tree_pairings = BTreeSet::new();
    let mut placed: Vec<PlacedSimplex> = Vec::new();
    let mut seen = ApproxKeySet::new(PLACEMENT_GRID);
    reference[0] = Some(DMatrix::identity(4, 4));
    seen.insert(&placement_key(&DMatrix::identity(4, 4)));
    placed.push(PlacedSimplex {
        simplex: 0,
        matrix: DMatrix::identity(4, 4),
        word: vec![],
        depth: 0,
        parent: None,
    });
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        let s = placed[idx].simplex;
        let mut exits: Vec<(usize, &Crossing)> = (0..4)
            .filter_map(|face| crossings.get(&(s, face)).map(|c| (face, c)))
            .collect();
        exits.sort_by_key(|(_, c)| c.pairing);
        for (face, c) in exits {
            if reference[c.target].is_some() {
                continue;
            }
            let x = &placed[idx].matrix * &c.matrix;
            let vol = normalized_volume(&x);
            if vol < 1e-12 {
                return Err(DevmapError::DegeneratePlacement(vol));
            }
            reference[c.target] = Some(x.clone());
            tree_pairings.insert(c.pairing);
            seen.insert(&placement_key(&x));
            placed.push(PlacedSimplex {
                simplex: c.target,
                matrix: x,
                word: vec![],
                depth: 0,
                parent: Some((idx, face)),
            });
            queue.push_back(placed.len() - 1);
        }
    }
    if reference.iter().any(Option::is_none) {
        return Err(DevmapError::InvalidGluing("dual graph is disconnected".into()));
    }
    let reference: Vec<DMatrix<f64>> = reference.into_iter().map(Option::unwrap).collect();
    let seeds: Vec<usize> = (0..placed.len()).collect();

    let holonomy = data
        .pairings
        .iter()
        .enumerate()
        .filter(|(idx, _)| !tree_pairings.contains(idx))
        .map(|(idx, p)| {
            let inv = reference[p.b].clone().try_inverse().expect("placed simplices are nondegenerate");
            let h = &reference[p.a] * p.pasting_matrix() * inv;
            Ok(HolonomyGenerator {
                pairing: idx,
                map: ProjMap::new(h)?,
            })
        })
        .collect::<Result<Vec<_>, DevmapError>>()?;

    let mut frontier = seeds.clone();
    for depth in 1..=depth_max {
        let candidates: Vec<Vec<(usize, usize, Crossing, DMatrix<f64>)>> = frontier
            .par_iter()
            .map(|&idx| {
                let p = &placed[idx];
                (0..4)
                    .filter_map(|face| {
                        let c = crossings.get(&(p.simplex, face))?;
                        Some((idx, face, c.clone(), &p.matrix * &c.matrix))
                    })
                    .collect()
            })
            .collect();
        let mut next = Vec::new();
        for (parent, face, c, x) in candidates.into_iter().flatten() {
            if !seen.insert(&placement_key(&x)) {
                continue;
            }
            let vol = normalized_volume(&x);
            if vol < 1e-12 {
                return Err(DevmapError::DegeneratePlacement(vol));
            }
            let mut word = placed[parent].word.clone();
            word.push(if c.forward {
                format!("p{}", c.pairing)
            } else {
                format!("p{}'", c.pairing)
            });
            placed.push(PlacedSimplex {
                simplex: c.target,
                matrix: x,
                word,
                depth,
                parent: Some((parent, face)),
            });
            next.push(placed.len() - 1);
            if placed.len() > cap {
                return Err(DevmapError::ExplosionGuard(cap));
            }
        }
        frontier = next;
    }
    Ok(DevelopedComplex {
        placed,
        seeds,
        holonomy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatorResidual {
    pub simplex: usize,
    pub vertices: (usize, usize),
    pub order: u32,
    /// min over signs of ‖M^order / |det|^{order/4} ∓ I‖_∞.
    pub residual: f64,
}

/// Edge relators `h_e^{order} = ±I` for every declared edge order.
pub fn relator_residuals(data: &GluingData) -> Vec<RelatorResidual> {
    data.edge_orders
        .iter()
        .map(|e| {
            let residual = match data.edge_cycle(e.simplex, e.vertices.0, e.vertices.1) {
                Some(m) => {
                    let scale = m.determinant().abs().powf(0.25);
                    let mut p = DMatrix::identity(4, 4);
                    let ms = m / scale;
                    for _ in 0..e.order {
                        p = &p * &ms;
                    }
                    let id = DMatrix::<f64>::identity(4, 4);
                    (&p - &id).amax().min((&p + &id).amax())
                }
                None => f64::INFINITY,
            };
            RelatorResidual {
                simplex: e.simplex,
                vertices: e.vertices,
                order: e.order,
                residual,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfinementReport {
    /// Supporting functionals at the seed vertices (unit vectors).
    pub halfspaces: Vec<Vec<f64>>,
    pub seed_vertices: Vec<Vec<f64>>,
    /// max over functionals and placed vertices of `max(0, −φ(v̂))`.
    pub max_violation: f64,
    pub max_chord: f64,
    pub eps0: f64,
    pub pass: bool,
}

/// Supporting half-spaces at the distinct seed vertices and the chord bound.
pub fn confinement_check(complex: &DevelopedComplex, eps0: f64) -> ConfinementReport {
    let mut verts = complex.vertices();
    if let Some((phi, _)) = complex.chart() {
        for v in verts.iter_mut() {
            if phi.dot(v) < 0.0 {
                v.neg_mut();
            }
        }
    }
    let mut seed_set = ApproxKeySet::new(1e-9);
    let mut seeds: Vec<DVector<f64>> = Vec::new();
    for &s in &complex.seeds {
        for k in 0..4 {
            let v = unit(&complex.placed[s].vertex(k));
            let key = ProjPoint::normalize(&v).expect("nonzero").coords().clone();
            if seed_set.insert(key.as_slice()) {
                seeds.push(v);
            }
        }
    }
    let results: Vec<(DVector<f64>, f64)> = seeds
        .par_iter()
        .map(|s| {
            let rows: Vec<DVector<f64>> = verts
                .iter()
                .filter(|v| (*v - s).norm() > 1e-9 && (*v + s).norm() > 1e-9)
                .cloned()
                .collect();
            match lp::max_min_margin(4, &rows, &[s.clone()]) {
                Some((phi, _)) if phi.norm() > 1e-12 => {
                    let phi = unit(&phi);
                    let violation = verts
                        .iter()
                        .map(|v| (-phi.dot(v)).max(0.0))
                        .fold(0.0, f64::max);
                    (phi, violation)
                }
                _ => (DVector::zeros(4), f64::INFINITY),
            }
        })
        .collect();
    let max_violation = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let max_chord = max_pairwise_angle(&verts);
    let pass = max_violation <= 1e-8 && max_chord <= std::f64::consts::PI - eps0;
    ConfinementReport {
        halfspaces: results.iter().map(|r| r.0.iter().copied().collect()).collect(),
        seed_vertices: seeds.iter().map(|s| s.iter().copied().collect()).collect(),
        max_violation,
        max_chord,
        eps0,
        pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvexityClass {
    StrictlyConvexSoFar,
    ConvexSoFar,
    NotConvex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub verdict: ConvexityClass,
    pub chart_margin: f64,
    pub chords_tested: usize,
    pub chord_exits: usize,
    /// Worst barycentric deficit over chord sample points.
    pub worst_exit: f64,
    pub collinear_boundary_triples: usize,
}

/// Weights of the sample points taken in each core simplex.
fn core_weights() -> Vec<[f64; 4]> {
    let mut out = vec![[0.25; 4]];
    for k in 0..4 {
        let mut w = [0.1; 4];
        w[k] = 0.7;
        out.push(w);
    }
    out
}

/// Finite-depth convexity certificate; see [`ConvexityClass`].
pub fn convexity_verdict(complex: &DevelopedComplex) -> ConvexityReport {
    let Some((phi, margin)) = complex.chart() else {
        return ConvexityReport {
            verdict: ConvexityClass::NotConvex,
            chart_margin: 0.0,
            chords_tested: 0,
            chord_exits: 0,
            worst_exit: f64::INFINITY,
            collinear_boundary_triples: 0,
        };
    };
    let normalized = complex.chart_normalized(&phi);
    let inverses: Vec<DMatrix<f64>> = normalized
        .iter()
        .map(|m| m.clone().try_inverse().expect("nondegenerate simplex"))
        .collect();

    // Chords between interior points of core simplices.
    let core_depth = complex.max_depth() / 2;
    let mut points: Vec<(usize, DVector<f64>)> = Vec::new();
    for (idx, (p, m)) in complex.placed.iter().zip(&normalized).enumerate() {
        if p.depth > core_depth {
            continue;
        }
        for w in core_weights() {
            points.push((idx, m * DVector::from_column_slice(&w)));
        }
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i].0 != points[j].0 {
                pairs.push((i, j));
            }
        }
    }
    const MAX_CHORDS: usize = 2000;
    let stride = pairs.len().div_ceil(MAX_CHORDS).max(1);
    let chosen: Vec<(usize, usize)> = pairs.into_iter().step_by(stride).collect();
    let exits: Vec<f64> = chosen
        .par_iter()
        .map(|&(i, j)| {
            let mut worst = 0.0f64;
            for k in 1..10 {
                let t = k as f64 / 10.0;
                let x = &points[i].1 * (1.0 - t) + &points[j].1 * t;
                let deficit = inverses
                    .iter()
                    .map(|inv| (inv * &x).min())
                    .fold(f64::NEG_INFINITY, f64::max);
                worst = worst.max(-deficit);
            }
            worst
        })
        .collect();
    let chord_exits = exits.iter().filter(|e| **e > 1e-6).count();
    let worst_exit = exits.iter().copied().fold(0.0, f64::max);
    if chord_exits > 0 {
        return ConvexityReport {
            verdict: ConvexityClass::NotConvex,
            chart_margin: margin,
            chords_tested: chosen.len(),
            chord_exits,
            worst_exit,
            collinear_boundary_triples: 0,
        };
    }

    let collinear = collinear_boundary_triples(complex, &phi);
    ConvexityReport {
        verdict: if collinear == 0 {
            ConvexityClass::StrictlyConvexSoFar
        } else {
            ConvexityClass::ConvexSoFar
        },
        chart_margin: margin,
        chords_tested: chosen.len(),
        chord_exits,
        worst_exit,
        collinear_boundary_triples: collinear,
    }
}

/// Collinear triples of hull vertices on a common hull facet that are not
/// all in the closed star of a single vertex of the complex.
fn collinear_boundary_triples(complex: &DevelopedComplex, phi: &DVector<f64>) -> usize {
    let mut verts = complex.vertices();
    for v in verts.iter_mut() {
        if phi.dot(v) < 0.0 {
            v.neg_mut();
        }
    }
    let Ok(facets) = hull_facets(&verts) else {
        return usize::MAX;
    };
    let index_of = |x: &DVector<f64>| {
        let u = unit(x);
        let u = if phi.dot(&u) < 0.0 { -u } else { u };
        verts.iter().position(|v| (v - &u).norm() < 1e-9)
    };
    let mut star: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); verts.len()];
    for p in &complex.placed {
        let ids: Vec<usize> = (0..4).filter_map(|k| index_of(&p.vertex(k))).collect();
        for &a in &ids {
            star[a].extend(ids.iter().copied());
        }
    }
    let mut count = 0;
    for h in &facets {
        let on: Vec<usize> = (0..verts.len()).filter(|&i| h.dot(&verts[i]).abs() < 1e-9).collect();
        for a in 0..on.len() {
            for b in a + 1..on.len() {
                for c in b + 1..on.len() {
                    let (i, j, k) = (on[a], on[b], on[c]);
                    let m = DMatrix::from_columns(&[verts[i].clone(), verts[j].clone(), verts[k].clone()]);
                    if m.singular_values().min() > 1e-9 {
                        continue;
                    }
                    let excused = star
                        .iter()
                        .any(|s| s.contains(&i) && s.contains(&j) && s.contains(&k));
                    if !excused {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndClass {
    Horospherical,
    LensCompatible,
    TotallyGeodesicCompatible,
    Unclassified,
}

impl EndClass {
    /// Totally geodesic compatibility refines lens compatibility.
    pub fn is_lens_compatible(self) -> bool {
        matches!(self, EndClass::LensCompatible | EndClass::TotallyGeodesicCompatible)
    }
}

#[derive(Debug, Clone)]
pub struct EndDescriptor {
    pub vertex: ProjPoint,
    pub generators: Vec<ProjMap>,
}

/// `|det| = 1` representative.
fn unimodular(g: &DMatrix<f64>) -> DMatrix<f64> {
    g / g.determinant().abs().powf(1.0 / g.nrows() as f64)
}

/// Eigenvalues read off the real Schur form.
fn eigenvalues(g: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let (_, t) = g.clone().schur().unpack();
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mean = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc >= 0.0 {
                out.push(Complex::new(mean + disc.sqrt(), 0.0));
                out.push(Complex::new(mean - disc.sqrt(), 0.0));
            } else {
                out.push(Complex::new(mean, (-disc).sqrt()));
                out.push(Complex::new(mean, -(-disc).sqrt()));
            }
            i += 2;
        } else {
            out.push(Complex::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

/// Eigenvalues grouped into clusters of radius `1e-3` and replaced by the
/// cluster means. Rounding splits a Jordan block of size `k` into `k`
/// eigenvalues at distance `O(ε^{1/k})`, but their mean stays accurate.
fn clustered_eigenvalues(g: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut clusters: Vec<(Complex<f64>, usize)> = Vec::new();
    for z in &eigenvalues(g) {
        match clusters
            .iter_mut()
            .find(|(sum, n)| (sum / *n as f64 - z).norm() < 1e-3 * z.norm().max(1.0))
        {
            Some((sum, n)) => {
                *sum += z;
                *n += 1;
            }
            None => clusters.push((*z, 1)),
        }
    }
    clusters.into_iter().map(|(sum, n)| sum / n as f64).collect()
}

/// Every eigenvalue of modulus one within `1e-6`.
fn is_unit_modulus(g: &DMatrix<f64>) -> bool {
    clustered_eigenvalues(g)
        .iter()
        .all(|z| (z.norm() - 1.0).abs() <= 1e-6)
}

/// Real eigenvalues (imaginary parts below 1e-8), deduplicated.
fn real_eigenvalues(g: &DMatrix<f64>) -> Option<Vec<f64>> {
    let eig = eigenvalues(g);
    let mut out: Vec<f64> = Vec::new();
    for z in eig.iter() {
        if z.im.abs() > 1e-8 {
            return None;
        }
        if !out.iter().any(|x| (x - z.re).abs() < 1e-7 * z.re.abs().max(1.0)) {
            out.push(z.re);
        }
    }
    Some(out)
}

fn null_space(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let cols = m.ncols();
    let mut padded = DMatrix::zeros(m.nrows().max(cols), cols);
    padded.rows_mut(0, m.nrows()).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= tol)
        .map(|(k, _)| v_t.row(k).transpose().into_owned())
        .collect()
}

fn diagonalizable(g: &DMatrix<f64>, eigenvalues: &[f64]) -> bool {
    let n = g.nrows();
    let total: usize = eigenvalues
        .iter()
        .map(|&l| null_space(&(g - DMatrix::identity(n, n) * l), 1e-8 * g.norm()).len())
        .sum();
    total == n
}

/// Classifies an end by the eigenvalue criteria of its generators.
pub fn classify_end(end: &EndDescriptor) -> Result<EndClass, DevmapError> {
    let v = unit(end.vertex.coords());
    let mut gens: Vec<DMatrix<f64>> = Vec::new();
    for (k, g) in end.generators.iter().enumerate() {
        let gv = g.matrix() * &v;
        let residual = (&gv - &v * v.dot(&gv)).norm() / gv.norm();
        if residual > 1e-8 {
            return Err(DevmapError::VertexNotFixed(k, residual));
        }
        let mut m = unimodular(g.matrix());
        if v.dot(&(&m * &v)) < 0.0 {
            m.neg_mut();
        }
        gens.push(m);
    }
    if gens.iter().all(is_unit_modulus) {
        return Ok(EndClass::Horospherical);
    }
    let mut lens = true;
    for g in &gens {
        if is_unit_modulus(g) {
            continue;
        }
        let Some(eigs) = real_eigenvalues(g) else {
            lens = false;
            break;
        };
        if eigs.iter().any(|&l| l <= 0.0) || !diagonalizable(g, &eigs) {
            lens = false;
            break;
        }
        let lv = v.dot(&(g * &v));
        let (lo, hi) = eigs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l), b.max(l)));
        if !(lv > lo * (1.0 + 1e-6) && lv < hi * (1.0 - 1e-6)) {
            lens = false;
            break;
        }
    }
    if !lens {
        return Ok(EndClass::Unclassified);
    }
    if common_hyperplane_avoiding(&gens, &v) {
        Ok(EndClass::TotallyGeodesicCompatible)
    } else {
        Ok(EndClass::LensCompatible)
    }
}

/// Whether some `φ` is an eigenvector of every `gᵀ` with `φ(v) ≠ 0`.
fn common_hyperplane_avoiding(gens: &[DMatrix<f64>], v: &DVector<f64>) -> bool {
    let n = v.len();
    let choices: Vec<Vec<f64>> = gens
        .iter()
        .map(|g| real_eigenvalues(&g.transpose()).unwrap_or_default())
        .collect();
    if choices.iter().any(Vec::is_empty) {
        return false;
    }
    let mut index = vec![0usize; gens.len()];
    loop {
        let mut stacked = DMatrix::zeros(n * gens.len(), n);
        for (k, g) in gens.iter().enumerate() {
            let block = g.transpose() - DMatrix::identity(n, n) * choices[k][index[k]];
            stacked.view_mut((k * n, 0), (n, n)).copy_from(&block);
        }
        let scale = gens.iter().map(|g| g.norm()).fold(1.0, f64::max);
        for phi in null_space(&stacked, 1e-6 * scale) {
            if phi.dot(v).abs() > 1e-6 {
                return true;
            }
        }
        // Next combination of eigenvalue choices.
        let mut k = 0;
        loop {
            if k == gens.len() {
                return false;
            }
            index[k] += 1;
            if index[k] < choices[k].len() {
                break;
            }
            index[k] = 0;
            k += 1;
        }
    }
}

/// End descriptors at the vertices of the first seed: the edge holonomies
/// around the three edges at each vertex and their pairwise quotients.
pub fn end_descriptors(data: &GluingData) -> Result<Vec<EndDescriptor>, DevmapError> {
    (0..4)
        .map(|v| {
            let mut rotations = Vec::new();
            for u in (0..4).filter(|&u| u != v) {
                if let Some(m) = data.edge_cycle(0, v, u) {
                    rotations.push(m);
                }
            }
            let mut generators = Vec::new();
            for a in 0..rotations.len() {
                generators.push(ProjMap::new(rotations[a].clone())?);
                for b in a + 1..rotations.len() {
                    let inv = rotations[b].clone().try_inverse().ok_or(ProjError::Singular)?;
                    generators.push(ProjMap::new(&rotations[a] * inv)?);
                }
            }
            let mut e = DVector::zeros(4);
            e[v] = 1.0;
            Ok(EndDescriptor {
                vertex: ProjPoint::normalize(&e)?,
                generators,
            })
        })
        .collect()
}

/// Doubled tetrahedron of a four-facet Coxeter system on the standard
/// simplex. The Cartan matrix is diagonally conjugated so that
/// `a_i3 = −2` for `i < 3`, which puts the second seed's free vertex at
/// `[2, 2, 2, −1]` when all λ are 1.
pub fn doubled_tetrahedron(sys: &CoxeterSystem) -> Result<GluingData, DevmapError> {
    let a = sys.cartan();
    if a.nrows() != 4 {
        return Err(DevmapError::InvalidGluing("doubled tetrahedron needs four facets".into()));
    }
    let mut d = [1.0; 4];
    for (i, di) in d.iter_mut().enumerate().take(3) {
        if a[(i, 3)] == 0.0 {
            return Err(DevmapError::InvalidGluing("a_i3 must be nonzero".into()));
        }
        *di = 2.0 / a[(i, 3)].abs();
    }
    let conj = DMatrix::from_fn(4, 4, |i, j| d[i] * a[(i, j)] / d[j]);
    let labels = |p: &str| [0, 1, 2, 3].map(|k| format!("{p}{k}"));
    let pairings = [3usize, 0, 1, 2]
        .iter()
        .map(|&k| {
            let mut apex = [0.0; 4];
            for (i, x) in apex.iter_mut().enumerate() {
                *x = if i == k { -1.0 } else { -conj[(i, k)] };
            }
            FacePairing {
                a: 0,
                face_a: k,
                b: 1,
                face_b: k,
                perm: [0, 1, 2, 3],
                invariants: PastingInvariants {
                    face_multipliers: [1.0; 3],
                    apex,
                },
            }
        })
        .collect();
    let orders = sys.orders();
    let mut edge_orders = Vec::new();
    for u in 0..4 {
        for v in u + 1..4 {
            let others: Vec<usize> = (0..4).filter(|&w| w != u && w != v).collect();
            if let Some(order) = orders[others[0]][others[1]] {
                edge_orders.push(EdgeOrder {
                    simplex: 0,
                    vertices: (u, v),
                    order,
                });
            }
        }
    }
    Ok(GluingData {
        simplices: vec![labels("a"), labels("b")],
        pairings,
        edge_orders,
    })
}

/// λ's realising end parameters `(s = 1, t₁, t₂, t₃)` on the reflection
/// slice: `λ₁₂ = 1/t₃`, `λ₂₃ = 1/t₁`, `λ₁₃ = t₂`, all others 1. The fourth
/// parameter is then `t₀ = 1/(t₁t₂t₃)`, so `∏ t = 1 = C(1)`.
pub fn reflection_lambdas(t: [f64; 3]) -> crate::coxeter::DeformationParams {
    crate::coxeter::DeformationParams::uniform()
        .with(1, 2, 1.0 / t[2])
        .with(2, 3, 1.0 / t[0])
        .with(1, 3, t[1])
}

/// JSON form of a developed complex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexJson {
    pub dim: usize,
    /// Affine chart functional used for OBJ output.
    pub chart: Vec<f64>,
    pub simplices: Vec<SimplexJson>,
    pub holonomy: Vec<Vec<Vec<f64>>>,
    /// Convex hull of the vertices in the body schema.
    pub body: Option<BodyJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexJson {
    pub simplex: usize,
    pub depth: usize,
    pub word: String,
    pub vertices: Vec<Vec<f64>>,
}

impl DevelopedComplex {
    /// Functional used as the affine chart for export (the LP chart when it
    /// exists, otherwise the last coordinate).
    pub fn export_chart(&self) -> DVector<f64> {
        self.chart().map(|c| c.0).unwrap_or_else(|| {
            let mut e = DVector::zeros(4);
            e[3] = 1.0;
            e
        })
    }

    pub fn to_json(&self) -> ComplexJson {
        let chart = self.export_chart();
        let body = self
            .chart()
            .and_then(|(phi, _)| {
                let verts: Vec<DVector<f64>> = self
                    .vertices()
                    .into_iter()
                    .map(|v| if phi.dot(&v) < 0.0 { -v } else { v })
                    .collect();
                ConvexBody::hull_of(&verts, 0).ok()
            })
            .map(|b| b.to_json());
        ComplexJson {
            dim: 3,
            chart: chart.iter().copied().collect(),
            simplices: self
                .placed
                .iter()
                .map(|p| SimplexJson {
                    simplex: p.simplex,
                    depth: p.depth,
                    word: p.word_string(),
                    vertices: (0..4).map(|k| p.vertex(k).iter().copied().collect()).collect(),
                })
                .collect(),
            holonomy: self
                .holonomy
                .iter()
                .map(|h| h.map.matrix().row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
            body,
        }
    }

    /// Rebuilds a complex (placements and holonomy) from its JSON form.
    pub fn from_json(json: &ComplexJson) -> Result<Self, DevmapError> {
        let placed = json
            .simplices
            .iter()
            .map(|s| {
                if s.vertices.len() != 4 || s.vertices.iter().any(|v| v.len() != 4) {
                    return Err(DevmapError::InvalidGluing("simplex needs four 4-vectors".into()));
                }
                Ok(PlacedSimplex {
                    simplex: s.simplex,
                    matrix: DMatrix::from_fn(4, 4, |i, j| s.vertices[j][i]),
                    word: s.word.split_whitespace().map(String::from).collect(),
                    depth: s.depth,
                    parent: None,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let seeds = placed
            .iter()
            .enumerate()
            .filter(|(_, p)| p.depth == 0)
            .map(|(i, _)| i)
            .collect();
        let holonomy = json
            .holonomy
            .iter()
            .enumerate()
            .map(|(k, rows)| {
                let m = DMatrix::from_fn(4, 4, |i, j| rows[i][j]);
                Ok(HolonomyGenerator {
                    pairing: k,
                    map: ProjMap::new(m)?,
                })
            })
            .collect::<Result<Vec<_>, DevmapError>>()?;
        Ok(Self {
            placed,
            seeds,
            holonomy,
        })
    }

    /// Wavefront OBJ: four vertices and four triangular faces per simplex,
    /// in the affine chart `x ↦ coordinates of x/φ(x)` on `φ^⊥`.
    pub fn to_obj(&self) -> String {
        let phi = self.export_chart();
        let basis = crate::convex::complement_basis(&phi);
        let mut out = String::from("# developed complex\n");
        for p in &self.placed {
            for k in 0..4 {
                let x = p.vertex(k);
                let y = basis.transpose() * (&x / phi.dot(&x));
                out.push_str(&format!("v {:.12} {:.12} {:.12}\n", y[0], y[1], y[2]));
            }
        }
        for (i, _) in self.placed.iter().enumerate() {
            let b = 4 * i + 1;
            for face in [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]] {
                out.push_str(&format!("f {} {} {}\n", b + face[0], b + face[1], b + face[2]));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coxeter::{cartan_from_orders, standard_simplex, uniform_orders, DeformationParams};

    fn hyperbolic_data() -> GluingData {
        let sys = cartan_from_orders(&standard_simplex(3), &uniform_orders(4, 3), &DeformationParams::uniform())
            .unwrap();
        doubled_tetrahedron(&sys).unwrap()
    }

    #[test]
    fn seeds_at_fixed_coordinates() {
        let c = develop(&hyperbolic_data(), 0, 100).unwrap();
        assert_eq!(c.placed.len(), 2);
        assert_eq!(c.placed[0].matrix, DMatrix::<f64>::identity(4, 4));
        let t2 = &c.placed[1].matrix;
        for k in 0..3 {
            assert_eq!(t2.column(k).into_owned(), DMatrix::<f64>::identity(4, 4).column(k).into_owned());
        }
        let w = t2.column(3).into_owned();
        assert!((w - DVector::from_vec(vec![2.0, 2.0, 2.0, -1.0])).amax() < 1e-12);
    }

    #[test]
    fn relators_hold() {
        let data = hyperbolic_data();
        let r = relator_residuals(&data);
        assert_eq!(r.len(), 6);
        assert!(r.iter().all(|x| x.residual < 1e-8), "{r:?}");
    }

    #[test]
    fn zero_cross_ratio_refused() {
        let mut data = hyperbolic_data();
        data.pairings[1].invariants.face_multipliers[0] = 0.0;
        assert_eq!(develop(&data, 1, 100).unwrap_err(), DevmapError::ZeroCrossRatio(1));
    }

    #[test]
    fn single_simplex_is_strict() {
        let c = DevelopedComplex::from_simplices(vec![DMatrix::identity(4, 4)]);
        assert_eq!(convexity_verdict(&c).verdict, ConvexityClass::StrictlyConvexSoFar);
    }

    #[test]
    fn edge_sharing_pair_is_not_convex() {
        let col = |xs: [f64; 3]| DVector::from_vec(vec![xs[0], xs[1], xs[2], 1.0]);
        let first = DMatrix::from_columns(&[
            col([0.0, 0.0, 0.0]),
            col([1.0, 0.0, 0.0]),
            col([0.0, 1.0, 0.0]),
            col([0.0, 0.0, 1.0]),
        ]);
        let second = DMatrix::from_columns(&[
            col([0.0, 0.0, 0.0]),
            col([1.0, 0.0, 0.0]),
            col([0.0, -1.0, 0.0]),
            col([0.0, 0.0, -1.0]),
        ]);
        let c = DevelopedComplex::from_simplices(vec![first, second]);
        assert_eq!(convexity_verdict(&c).verdict, ConvexityClass::NotConvex);
    }

    #[test]
    fn classify_examples() {
        let v = |xs: &[f64]| DVector::from_column_slice(xs);
        let unipotent = |i: usize, j: usize| {
            let mut m = DMatrix::identity(4, 4);
            m[(i, j)] = 1.0;
            ProjMap::new(m).unwrap()
        };
        let cusp = EndDescriptor {
            vertex: ProjPoint::normalize(&v(&[1.0, 0.0, 0.0, 0.0])).unwrap(),
            generators: vec![unipotent(0, 1), unipotent(0, 2)],
        };
        assert_eq!(classify_end(&cusp).unwrap(), EndClass::Horospherical);
        let g = ProjMap::new(DMatrix::from_diagonal(&v(&[2.0, 1.0, 0.5]))).unwrap();
        let middle = EndDescriptor {
            vertex: ProjPoint::normalize(&v(&[0.0, 1.0, 0.0])).unwrap(),
            generators: vec![g.clone()],
        };
        assert!(classify_end(&middle).unwrap().is_lens_compatible());
        let top = EndDescriptor {
            vertex: ProjPoint::normalize(&v(&[1.0, 0.0, 0.0])).unwrap(),
            generators: vec![g],
        };
        assert_eq!(classify_end(&top).unwrap(), EndClass::Unclassified);
        let moved = EndDescriptor {
            vertex: ProjPoint::normalize(&v(&[1.0, 1.0, 0.0, 0.0])).unwrap(),
            generators: vec![unipotent(0, 1), unipotent(2, 3)],
        };
        assert!(matches!(classify_end(&moved), Err(DevmapError::VertexNotFixed(0, _))));
    }
}
