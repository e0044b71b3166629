//! Built-in metric models with parameter schemas, expected classification,
//! base points, reference curvature values and test curves.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::geodesic::TangentVector;
use crate::metric::{curvature_at, sectional, ChartBox, ChartPoint, MetricModel, ModelKind, Vec3};
use crate::tube::{ChartCircle, RegularCurve};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub default: f64,
    pub min: f64,
    pub max: f64,
    pub help: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Yes,
    No,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceValue {
    ScalarCurvature { point: ChartPoint, value: f64 },
    Sectional { point: ChartPoint, a: [f64; 3], b: [f64; 3], value: f64 },
}

/// Curves used by tube, capsule and cylinder tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestCurves {
    /// One unit-speed geodesic segment per base point.
    pub geodesics: Vec<RegularCurve>,
    /// Open non-geodesic arcs.
    pub arcs: Vec<RegularCurve>,
    /// Smoothly closed curves.
    pub loops: Vec<RegularCurve>,
}

/// A registry entry resolved against concrete parameter values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSetup {
    pub model: MetricModel,
    pub expected: Expectation,
    pub rationale: String,
    pub working_radius: f64,
    pub base_points: Vec<ChartPoint>,
    pub references: Vec<ReferenceValue>,
    pub curves: TestCurves,
}

struct Layout {
    kind: ModelKind,
    domain: ChartBox,
    working_radius: f64,
    base_points: Vec<ChartPoint>,
    references: Vec<ReferenceValue>,
    axis_length: f64,
    circle_radius: f64,
}

pub struct ModelRegistryEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: Vec<ParamSpec>,
    pub expected: Expectation,
    pub rationale: &'static str,
    build: fn(&BTreeMap<String, f64>) -> Layout,
}

impl ModelRegistryEntry {
    pub fn defaults(&self) -> BTreeMap<String, f64> {
        self.params.iter().map(|p| (p.name.clone(), p.default)).collect()
    }

    /// One-line description of the parameter schema.
    pub fn schema(&self) -> String {
        if self.params.is_empty() {
            return format!("{}: no parameters", self.name);
        }
        let ps: Vec<String> = self
            .params
            .iter()
            .map(|p| format!("{}={} in [{}, {}]", p.name, p.default, p.min, p.max))
            .collect();
        format!("{}: {}", self.name, ps.join(", "))
    }
}

pub struct Registry {
    entries: Vec<ModelRegistryEntry>,
}

fn param(name: &str, default: f64, min: f64, max: f64, help: &str) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        default,
        min,
        max,
        help: help.into(),
    }
}

fn tau_ref(point: ChartPoint, value: f64) -> ReferenceValue {
    ReferenceValue::ScalarCurvature { point, value }
}

fn sec_ref(point: ChartPoint, a: [f64; 3], b: [f64; 3], value: f64) -> ReferenceValue {
    ReferenceValue::Sectional { point, a, b, value }
}

fn scaled(points: &[[f64; 3]], s: f64) -> Vec<ChartPoint> {
    points
        .iter()
        .map(|p| ChartPoint::new(p[0] * s, p[1] * s, p[2] * s))
        .collect()
}

const E1: [f64; 3] = [1.0, 0.0, 0.0];
const E2: [f64; 3] = [0.0, 1.0, 0.0];
const E3: [f64; 3] = [0.0, 0.0, 1.0];

fn euclidean(_: &BTreeMap<String, f64>) -> Layout {
    let o = ChartPoint::origin();
    Layout {
        kind: ModelKind::Euclidean,
        domain: ChartBox::cube(10.0),
        working_radius: 0.9,
        base_points: vec![o, ChartPoint::new(0.3, -0.2, 0.1), ChartPoint::new(1.0, 0.5, -0.7)],
        references: vec![tau_ref(o, 0.0), sec_ref(o, E1, E2, 0.0)],
        axis_length: 1.0,
        circle_radius: 0.5,
    }
}

fn space_form(kappa: f64, bases: &[[f64; 3]], half: f64, axis: f64, circle: f64) -> Layout {
    let s = 1.0 / kappa.abs().sqrt();
    let base_points = scaled(bases, s);
    let mut references: Vec<ReferenceValue> = base_points.iter().map(|p| tau_ref(*p, 6.0 * kappa)).collect();
    references.push(sec_ref(base_points[1], E1, E2, kappa));
    references.push(sec_ref(base_points[2], [1.0, 1.0, 0.0], E3, kappa));
    Layout {
        kind: ModelKind::SpaceForm { kappa },
        domain: ChartBox::cube(half * s),
        working_radius: 0.9 * s,
        base_points,
        references,
        axis_length: axis * s,
        circle_radius: circle * s,
    }
}

fn round_sphere(p: &BTreeMap<String, f64>) -> Layout {
    space_form(
        p["kappa"],
        &[[0.0; 3], [0.2, 0.1, -0.1], [-0.15, 0.25, 0.1]],
        1.5,
        1.0,
        0.25,
    )
}

fn hyperbolic(p: &BTreeMap<String, f64>) -> Layout {
    // the cube must stay inside the unit ball of the Poincaré chart
    space_form(
        p["kappa"],
        &[[0.0; 3], [0.08, -0.05, 0.04], [-0.06, 0.07, 0.05]],
        0.57,
        0.6,
        0.2,
    )
}

fn product_s2xr(_: &BTreeMap<String, f64>) -> Layout {
    let b0 = ChartPoint::new(FRAC_PI_2, 0.0, 0.0);
    let base_points = vec![b0, ChartPoint::new(1.2, 0.3, 0.5), ChartPoint::new(1.9, -0.4, -0.3)];
    let mut references: Vec<ReferenceValue> = base_points.iter().map(|p| tau_ref(*p, 2.0)).collect();
    references.push(sec_ref(b0, E1, E2, 1.0));
    references.push(sec_ref(b0, E1, E3, 0.0));
    Layout {
        kind: ModelKind::ProductS2R,
        domain: ChartBox {
            lo: [0.15, -3.0, -10.0],
            hi: [std::f64::consts::PI - 0.15, 3.0, 10.0],
        },
        working_radius: 0.9,
        base_points,
        references,
        axis_length: 1.0,
        circle_radius: 0.5,
    }
}

fn berger_sphere(p: &BTreeMap<String, f64>) -> Layout {
    let lambda = p["lambda"];
    let l2 = lambda * lambda;
    let b0 = ChartPoint::new(FRAC_PI_2, 0.0, 0.0);
    let base_points = vec![b0, ChartPoint::new(1.3, 0.4, -0.2), ChartPoint::new(1.8, -0.3, 0.5)];
    let mut references: Vec<ReferenceValue> = base_points.iter().map(|p| tau_ref(*p, 2.0 - 0.5 * l2)).collect();
    references.push(sec_ref(b0, E1, E2, 1.0 - 0.75 * l2));
    references.push(sec_ref(b0, E1, E3, 0.25 * l2));
    references.push(sec_ref(b0, E2, E3, 0.25 * l2));
    Layout {
        kind: ModelKind::Berger { lambda },
        domain: ChartBox {
            lo: [0.15, -3.0, -3.0],
            hi: [std::f64::consts::PI - 0.15, 3.0, 3.0],
        },
        working_radius: 0.9,
        base_points,
        references,
        axis_length: 1.0,
        circle_radius: 0.5,
    }
}

fn heisenberg(_: &BTreeMap<String, f64>) -> Layout {
    let o = ChartPoint::origin();
    let b1 = ChartPoint::new(0.7, -0.2, 1.1);
    let base_points = vec![o, b1, ChartPoint::new(-0.5, 0.8, -0.3)];
    let mut references: Vec<ReferenceValue> = base_points.iter().map(|p| tau_ref(*p, -0.5)).collect();
    references.push(sec_ref(o, E1, E2, -0.75));
    references.push(sec_ref(o, E1, E3, 0.25));
    references.push(sec_ref(b1, E1, [0.0, 1.0, 0.7], -0.75));
    Layout {
        kind: ModelKind::Heisenberg,
        domain: ChartBox::cube(5.0),
        working_radius: 0.9,
        base_points,
        references,
        axis_length: 1.0,
        circle_radius: 0.5,
    }
}

fn perturbed_conformal(p: &BTreeMap<String, f64>) -> Layout {
    let eps = p["eps"];
    let o = ChartPoint::origin();
    let base_points = vec![o, ChartPoint::new(0.3, 0.2, 0.0), ChartPoint::new(-0.2, 0.4, 0.1)];
    // τ = −2 e^{−2f} |∇f|² since f = εxy is harmonic
    let mut references: Vec<ReferenceValue> = base_points
        .iter()
        .map(|b| {
            let [x, y, _] = b.coords;
            tau_ref(*b, -2.0 * (-2.0 * eps * x * y).exp() * eps * eps * (x * x + y * y))
        })
        .collect();
    references.push(sec_ref(o, E1, E2, 0.0));
    references.push(sec_ref(o, [1.0, 1.0, 0.0], E3, -eps));
    Layout {
        kind: ModelKind::PerturbedConformal { eps },
        domain: ChartBox::cube(2.0),
        working_radius: 0.9,
        base_points,
        references,
        axis_length: 1.0,
        circle_radius: 0.5,
    }
}

impl Registry {
    pub fn builtin() -> Self {
        register_builtin_models()
    }

    pub fn entries(&self) -> &[ModelRegistryEntry] {
        &self.entries
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    pub fn get(&self, name: &str) -> Result<&ModelRegistryEntry> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| GeometryError::UnknownModel(name.into()))
    }

    /// Resolves `overrides` against the schema, builds the model and checks
    /// positive definiteness on the chart and the reference values.
    pub fn instantiate(&self, name: &str, overrides: &BTreeMap<String, f64>) -> Result<ModelSetup> {
        let entry = self.get(name)?;
        let mut params = entry.defaults();
        for (k, v) in overrides {
            let Some(spec) = entry.params.iter().find(|p| &p.name == k) else {
                return Err(GeometryError::InvalidArgument(format!(
                    "unknown parameter '{k}' ({})",
                    entry.schema()
                )));
            };
            if !(v.is_finite() && *v >= spec.min && *v <= spec.max) {
                return Err(GeometryError::InvalidArgument(format!(
                    "parameter {k}={v} outside [{}, {}]",
                    spec.min, spec.max
                )));
            }
            params.insert(k.clone(), *v);
        }
        let layout = (entry.build)(&params);
        let model = MetricModel::new(entry.name, params, layout.kind, layout.domain);
        check_domain(&model)?;
        for r in &layout.references {
            check_reference(&model, r)?;
        }
        let curves = test_curves(&model, &layout)?;
        Ok(ModelSetup {
            model,
            expected: entry.expected,
            rationale: entry.rationale.into(),
            working_radius: layout.working_radius,
            base_points: layout.base_points,
            references: layout.references,
            curves,
        })
    }
}

fn check_domain(model: &MetricModel) -> Result<()> {
    let b = &model.chart_domain;
    let n = 5;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let f = |lo: f64, hi: f64, s: usize| lo + (hi - lo) * s as f64 / (n - 1) as f64;
                let p = ChartPoint::new(f(b.lo[0], b.hi[0], i), f(b.lo[1], b.hi[1], j), f(b.lo[2], b.hi[2], k));
                model.metric_at(&p)?;
            }
        }
    }
    Ok(())
}

fn check_reference(model: &MetricModel, r: &ReferenceValue) -> Result<()> {
    let (got, want) = match r {
        ReferenceValue::ScalarCurvature { point, value } => (curvature_at(model, point)?.tau, *value),
        ReferenceValue::Sectional { point, a, b, value } => {
            (sectional(model, point, &Vec3::from(*a), &Vec3::from(*b))?, *value)
        }
    };
    if (got - want).abs() > 1e-9 * (1.0 + want.abs()) {
        return Err(GeometryError::InvalidArgument(format!(
            "model {}: reference {r:?} reproduced as {got}",
            model.name
        )));
    }
    Ok(())
}

/// Axis directions in orthonormal coordinates at the three base points.
const AXIS_DIRECTIONS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.6, 0.48, 0.64]];

fn test_curves(model: &MetricModel, layout: &Layout) -> Result<TestCurves> {
    let mut geodesics = Vec::new();
    for (p, d) in layout.base_points.iter().zip(AXIS_DIRECTIONS) {
        let b = model.orthonormal_basis(p)?;
        let u = b[0] * d[0] + b[1] * d[1] + b[2] * d[2];
        let u = u / model.norm(p, &u)?;
        geodesics.push(RegularCurve::geodesic(TangentVector::new(*p, u), layout.axis_length));
    }
    let circle = ChartCircle {
        center: layout.base_points[0].coords,
        e1: [1.0, 0.0, 0.0],
        e2: [0.0, 0.6, 0.8],
        radius: layout.circle_radius,
    };
    Ok(TestCurves {
        geodesics,
        arcs: vec![RegularCurve::Arc {
            circle,
            a: 0.0,
            b: std::f64::consts::PI,
        }],
        loops: vec![RegularCurve::closed_circle(circle)],
    })
}

const NATURALLY_REDUCTIVE: &str = "expected: yes (naturally reductive); taken from the classification \
     of 3-dimensional D'Atri spaces, confirmed by the battery rather than assumed";

/// The seven built-in models.
pub fn register_builtin_models() -> Registry {
    Registry {
        entries: vec![
            ModelRegistryEntry {
                name: "euclidean",
                summary: "flat ℝ³",
                params: vec![],
                expected: Expectation::Yes,
                rationale: "flat space; geodesic symmetries are isometries",
                build: euclidean,
            },
            ModelRegistryEntry {
                name: "round_sphere",
                summary: "sphere of constant curvature κ > 0, stereographic chart",
                params: vec![param("kappa", 1.0, 0.25, 4.0, "sectional curvature")],
                expected: Expectation::Yes,
                rationale: "symmetric space",
                build: round_sphere,
            },
            ModelRegistryEntry {
                name: "hyperbolic",
                summary: "hyperbolic space of curvature κ < 0, Poincaré ball chart",
                params: vec![param("kappa", -1.0, -4.0, -0.25, "sectional curvature")],
                expected: Expectation::Yes,
                rationale: "symmetric space",
                build: hyperbolic,
            },
            ModelRegistryEntry {
                name: "product_s2xr",
                summary: "unit 2-sphere times the line, coordinates (θ, φ, z)",
                params: vec![],
                expected: Expectation::Yes,
                rationale: "symmetric space",
                build: product_s2xr,
            },
            ModelRegistryEntry {
                name: "berger_sphere",
                summary: "Berger sphere with fibre scale λ, Euler-angle chart (θ, φ, ψ)",
                params: vec![param("lambda", 0.8, 0.3, 1.5, "Hopf fibre scale")],
                expected: Expectation::Yes,
                rationale: NATURALLY_REDUCTIVE,
                build: berger_sphere,
            },
            ModelRegistryEntry {
                name: "heisenberg",
                summary: "Heisenberg group with its standard left-invariant metric",
                params: vec![],
                expected: Expectation::Yes,
                rationale: NATURALLY_REDUCTIVE,
                build: heisenberg,
            },
            ModelRegistryEntry {
                name: "perturbed_conformal",
                summary: "conformally flat metric e^{2εxy} δ",
                params: vec![param("eps", 0.3, 0.05, 0.6, "perturbation strength ε")],
                expected: Expectation::No,
                rationale: "expected: no; ∇_uρ(u,u) ≠ 0 at generic points, so θ has a nonzero cubic term",
                build: perturbed_conformal,
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_models_load_with_defaults() {
        let reg = Registry::builtin();
        assert_eq!(reg.names().len(), 7);
        for name in reg.names() {
            let setup = reg.instantiate(name, &BTreeMap::new()).unwrap();
            assert_eq!(setup.base_points.len(), 3);
            assert_eq!(setup.curves.geodesics.len(), 3);
        }
    }

    #[test]
    fn schema_is_enforced() {
        let reg = Registry::builtin();
        assert!(matches!(
            reg.instantiate("nope", &BTreeMap::new()),
            Err(GeometryError::UnknownModel(_))
        ));
        let bad = BTreeMap::from([("lambda".to_string(), 0.5)]);
        assert!(reg.instantiate("heisenberg", &bad).is_err());
        let out_of_range = BTreeMap::from([("kappa".to_string(), 9.0)]);
        assert!(reg.instantiate("round_sphere", &out_of_range).is_err());
        let ok = BTreeMap::from([("kappa".to_string(), 2.0)]);
        let s = reg.instantiate("round_sphere", &ok).unwrap();
        assert!((s.working_radius - 0.9 / 2f64.sqrt()).abs() < 1e-15);
    }
}
