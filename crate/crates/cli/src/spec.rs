use crate::CliError;
use nalgebra::DVector;
use projconvex::convex::ConvexBody;
use projconvex::coxeter::{cartan_from_orders, standard_simplex, CoxeterSystem, DeformationParams, OrderMatrix};
use projconvex::devmap::{doubled_tetrahedron, reflection_lambdas, GluingData, DEFAULT_EPS0, DEFAULT_PLACEMENT_CAP};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecKind {
    ReflectionPolytope,
    DoubledReflection,
    Triangulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeSpec {
    /// Inward facet functionals `h` with the polytope `{h · x ≥ 0}`.
    pub halfspaces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSpec {
    pub pair: [usize; 2],
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(default)]
    pub lambdas: Vec<LambdaSpec>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub t: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub depth: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub eps0: f64,
    pub cap: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            depth: 5,
            n_samples: 100_000,
            seed: 0,
            eps0: DEFAULT_EPS0,
            cap: DEFAULT_PLACEMENT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbifoldSpec {
    pub name: String,
    pub kind: SpecKind,
    #[serde(default)]
    pub polytope: Option<PolytopeSpec>,
    /// Dihedral orders; `null` is an infinite order, the diagonal is ignored.
    #[serde(default)]
    pub orders: Option<OrderMatrix>,
    #[serde(default)]
    pub gluing: Option<GluingData>,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub options: RunOptions,
}

fn field_error(field: &str, message: &str) -> CliError {
    CliError::SpecParse(format!("field `{field}`: {message}"))
}

impl OrbifoldSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| CliError::FileNotFound(path.display().to_string()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| CliError::SpecParse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let facets = match self.kind {
            SpecKind::Triangulated => {
                let gluing = self
                    .gluing
                    .as_ref()
                    .ok_or_else(|| field_error("gluing", "required for kind triangulated"))?;
                gluing.validate()?;
                if !self.parameters.lambdas.is_empty() || self.parameters.t.is_some() {
                    return Err(field_error("parameters", "triangulated specs carry their invariants in `gluing`"));
                }
                return Ok(());
            }
            SpecKind::DoubledReflection => 4,
            SpecKind::ReflectionPolytope => match &self.polytope {
                Some(p) => p.halfspaces.len(),
                None => self.orders.as_ref().map_or(0, Vec::len),
            },
        };
        let orders = self
            .orders
            .as_ref()
            .ok_or_else(|| field_error("orders", "required for reflection kinds"))?;
        if orders.len() != facets || orders.iter().any(|row| row.len() != facets) {
            return Err(field_error("orders", &format!("must be a {facets}×{facets} matrix")));
        }
        if let Some(p) = &self.polytope {
            if self.kind == SpecKind::DoubledReflection {
                return Err(field_error("polytope", "doubled_reflection uses the standard simplex"));
            }
            let size = p.halfspaces.first().map_or(0, Vec::len);
            if size < 3 || p.halfspaces.iter().any(|h| h.len() != size) {
                return Err(field_error("polytope.halfspaces", "rows must share a length of at least 3"));
            }
        } else if facets < 3 {
            return Err(field_error("orders", "need at least three facets"));
        }
        for l in &self.parameters.lambdas {
            let [i, j] = l.pair;
            if i >= facets || j >= facets || i == j {
                return Err(field_error("parameters.lambdas", &format!("pair [{i}, {j}] out of range")));
            }
            if !(l.value > 0.0) {
                return Err(field_error("parameters.lambdas", "values must be positive"));
            }
        }
        if self.parameters.t.is_some() {
            if self.kind != SpecKind::DoubledReflection {
                return Err(field_error("parameters.t", "only for doubled_reflection"));
            }
            if !self.parameters.lambdas.is_empty() {
                return Err(field_error("parameters", "give either `lambdas` or `t`, not both"));
            }
        }
        if let Some(t) = self.parameters.t {
            if t.iter().any(|x| !(*x > 0.0)) {
                return Err(field_error("parameters.t", "values must be positive"));
            }
        }
        if let Some(s) = self.parameters.s {
            if !(s > 0.0) {
                return Err(field_error("parameters.s", "must be positive"));
            }
        }
        Ok(())
    }

    /// `s`, or 1 when absent.
    pub fn s(&self) -> f64 {
        self.parameters.s.unwrap_or(1.0)
    }

    /// Whether the end parameters lie on the realised reflection slice.
    pub fn realized(&self) -> bool {
        (self.s() - 1.0).abs() <= 1e-12
    }

    pub fn deformation(&self) -> DeformationParams {
        if let Some(t) = self.parameters.t {
            return reflection_lambdas(t);
        }
        self.parameters
            .lambdas
            .iter()
            .fold(DeformationParams::uniform(), |p, l| p.with(l.pair[0], l.pair[1], l.value))
    }

    pub fn polytope(&self) -> Result<ConvexBody, CliError> {
        match &self.polytope {
            Some(p) => Ok(ConvexBody::polytope(
                p.halfspaces.iter().map(|h| DVector::from_column_slice(h)).collect(),
                0,
            )?),
            None => {
                let facets = self.orders.as_ref().map_or(0, Vec::len);
                Ok(standard_simplex(facets - 1))
            }
        }
    }

    pub fn coxeter_system(&self) -> Result<CoxeterSystem, CliError> {
        if self.kind == SpecKind::Triangulated {
            return Err(CliError::InvalidArgument("triangulated specs have no Coxeter system".into()));
        }
        let orders = self.orders.as_ref().ok_or_else(|| field_error("orders", "missing"))?;
        Ok(cartan_from_orders(&self.polytope()?, orders, &self.deformation())?)
    }

    pub fn gluing_data(&self) -> Result<GluingData, CliError> {
        match self.kind {
            SpecKind::Triangulated => Ok(self.gluing.clone().expect("validated")),
            SpecKind::DoubledReflection => Ok(doubled_tetrahedron(&self.coxeter_system()?)?),
            SpecKind::ReflectionPolytope => Err(CliError::InvalidArgument(
                "reflection_polytope specs develop as tilings, not gluings".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIANGLE: &str = r#"{
        "name": "t",
        "kind": "reflection_polytope",
        "orders": [[null, 3, 3], [3, null, 3], [3, 3, null]]
    }"#;

    #[test]
    fn defaults_fill_options() {
        let spec = OrbifoldSpec::parse(TRIANGLE).unwrap();
        assert_eq!(spec.options, RunOptions::default());
        assert_eq!(spec.options.seed, 0);
        assert!(spec.realized());
        assert_eq!(spec.coxeter_system().unwrap().rank(), 3);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = TRIANGLE.replace("\"name\"", "\"nmae\"");
        assert!(matches!(OrbifoldSpec::parse(&text), Err(CliError::SpecParse(_))));
    }

    #[test]
    fn shape_errors_name_the_field() {
        let text = TRIANGLE.replace("[3, 3, null]", "[3, 3]");
        assert!(OrbifoldSpec::parse(&text).unwrap_err().to_string().contains("`orders`"));
        let text = TRIANGLE.replace("\"orders\"", "\"parameters\": {\"t\": [1, 1, 1]}, \"orders\"");
        assert!(OrbifoldSpec::parse(&text).unwrap_err().to_string().contains("parameters.t"));
    }

    #[test]
    fn t_maps_to_reflection_lambdas() {
        let text = r#"{"name": "d", "kind": "doubled_reflection",
            "orders": [[null,3,3,3],[3,null,3,3],[3,3,null,3],[3,3,3,null]],
            "parameters": {"t": [2.0, 3.0, 5.0]}}"#;
        let spec = OrbifoldSpec::parse(text).unwrap();
        assert_eq!(spec.deformation(), reflection_lambdas([2.0, 3.0, 5.0]));
        assert_eq!(spec.gluing_data().unwrap().simplices.len(), 2);
    }
}
