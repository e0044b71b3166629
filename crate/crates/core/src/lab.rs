//! The diagnostics battery: universal identities first, then the tests that
//! separate D'Atri metrics from the rest, assembled into a report.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::geodesic::{complete_frame, jacobi_radii, TangentVector};
use crate::metric::{ChartPoint, MetricModel, Vec3};
use crate::ode::OdeSettings;
use crate::quadrature::halton_directions;
use crate::registry::{Expectation, ModelSetup};
use crate::sphere::{
    cyclic_parallel_defect, recursion_residual, series_prediction, sphere_series, steiner_residual,
    tau_sphere_evenness_defect, total_scalar_hemisphere_with, total_scalar_sphere_with, SeriesGrid,
    SphereSettings,
};
use crate::tube::{
    capsule_total_with, cylinder_coefficient, cylinder_radii, knu_profile, tube_total_with, RegularCurve,
    TubeSettings,
};

/// Working radius the default battery radii refer to; radii scale with the
/// model's working radius.
pub const REFERENCE_WORKING_RADIUS: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative, for sphere totals and Steiner residuals.
    pub universal: f64,
    /// Relative, for capsule totals.
    pub capsule: f64,
    /// Absolute, for tubes about closed curves.
    pub torus: f64,
    /// Pass threshold of the D'Atri tests.
    pub datri_pass: f64,
    /// Relative to 4π, pass threshold of the hemisphere total test.
    pub hemisphere: f64,
    /// Ratio between decisive failure and pass thresholds.
    pub decisive_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            universal: 1e-5,
            capsule: 1e-4,
            torus: 1e-4,
            datri_pass: 1e-4,
            hemisphere: 1e-5,
            decisive_factor: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryConfig {
    pub seed: u64,
    pub sphere_radii: Vec<f64>,
    pub hemisphere_radius: f64,
    pub hemisphere_axes: usize,
    pub steiner_samples: usize,
    pub evenness_radius: f64,
    pub evenness_samples: usize,
    pub tube_radii: Vec<f64>,
    pub capsule_radius: f64,
    pub arc_capsule_radius: f64,
    pub series_k_max: i32,
    pub sphere: SphereSettings,
    pub tube: TubeSettings,
    pub tolerances: Tolerances,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            seed: 7,
            sphere_radii: vec![0.2, 0.4, 0.72],
            hemisphere_radius: 0.3,
            hemisphere_axes: 20,
            steiner_samples: 20,
            evenness_radius: 0.5,
            evenness_samples: 100,
            tube_radii: vec![0.15, 0.25],
            capsule_radius: 0.4,
            arc_capsule_radius: 0.25,
            series_k_max: 10,
            sphere: SphereSettings::default(),
            tube: TubeSettings::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestGroup {
    Universal,
    Datri,
    Informational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Between the pass threshold and decisive failure.
    Gray,
    Fail,
    Error,
    Recorded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub label: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub name: String,
    pub group: TestGroup,
    pub description: String,
    pub samples: Vec<Sample>,
    pub defect: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "D'ATRI-CONSISTENT")]
    DatriConsistent,
    #[serde(rename = "NOT-D'ATRI")]
    NotDatri,
    #[serde(rename = "INCONSISTENT")]
    Inconsistent,
    #[serde(rename = "INVALID")]
    Invalid,
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::DatriConsistent => "D'ATRI-CONSISTENT",
            Classification::NotDatri => "NOT-D'ATRI",
            Classification::Inconsistent => "INCONSISTENT",
            Classification::Invalid => "INVALID",
        }
    }

    pub fn matches(&self, expected: Expectation) -> bool {
        match expected {
            Expectation::Yes => *self == Classification::DatriConsistent,
            Expectation::No => *self == Classification::NotDatri,
            Expectation::Unknown => matches!(self, Classification::DatriConsistent | Classification::NotDatri),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub expected: Expectation,
    pub expectation_note: String,
    pub classification: Classification,
    pub matches_expected: bool,
    /// Universal identities that failed, in test order.
    pub failing_universal: Vec<String>,
    pub working_radius: f64,
    pub base_points: Vec<ChartPoint>,
    pub tests: Vec<TestRecord>,
    pub config: BatteryConfig,
}

impl DiagnosticsReport {
    pub fn test(&self, name: &str) -> Option<&TestRecord> {
        self.tests.iter().find(|t| t.name == name)
    }
}

/// `max |θ(ru) − θ(−ru)|` over `sample_size` low-discrepancy unit directions.
pub fn evenness_defect(model: &MetricModel, p: &ChartPoint, r: f64, sample_size: usize, seed: u64) -> Result<f64> {
    let basis = model.orthonormal_basis(p)?;
    let g = model.metric_at(p)?;
    let ode = OdeSettings::default();
    let defects: Vec<f64> = halton_directions(sample_size, seed)
        .par_iter()
        .map(|d| {
            let u = basis[0] * d[0] + basis[1] * d[1] + basis[2] * d[2];
            let mut th = [0.0; 2];
            for (i, s) in [1.0, -1.0].into_iter().enumerate() {
                let jt = jacobi_radii(model, p, &complete_frame(&g, &(u * s)), &[r], &ode)?.remove(0);
                th[i] = jt.volume_density();
            }
            Ok((th[0] - th[1]).abs())
        })
        .collect::<Result<_>>()?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}

fn unit_at(model: &MetricModel, p: &ChartPoint, d: &[f64; 3]) -> Result<Vec3> {
    let b = model.orthonormal_basis(p)?;
    Ok(b[0] * d[0] + b[1] * d[1] + b[2] * d[2])
}

fn fmt_point(p: &ChartPoint) -> String {
    format!("({:.4}, {:.4}, {:.4})", p.coords[0], p.coords[1], p.coords[2])
}

fn curve_label(c: &RegularCurve) -> String {
    match c {
        RegularCurve::Geodesic { start, a, b } => {
            format!("geodesic from {} t∈[{a}, {b}]", fmt_point(&start.base))
        }
        RegularCurve::Arc { circle, a, b } => format!(
            "circle arc centre {} radius {} t∈[{a:.4}, {b:.4}]",
            fmt_point(&ChartPoint { coords: circle.center }),
            circle.radius
        ),
    }
}

struct Outcome {
    samples: Vec<Sample>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { samples: Vec::new() }
    }

    fn push(&mut self, label: impl Into<String>, value: f64) {
        self.samples.push(Sample {
            label: label.into(),
            value,
        });
    }

    fn defect(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| if s.value.is_nan() { f64::INFINITY } else { s.value })
            .fold(0.0, f64::max)
    }
}

struct Battery<'a> {
    setup: &'a ModelSetup,
    config: &'a BatteryConfig,
    scale: f64,
    records: Vec<TestRecord>,
}

impl Battery<'_> {
    fn model(&self) -> &MetricModel {
        &self.setup.model
    }

    fn run(
        &mut self,
        name: &str,
        group: TestGroup,
        description: &str,
        tolerance: f64,
        body: impl FnOnce(&Self, &mut Outcome) -> Result<()>,
    ) {
        let mut out = Outcome::new();
        let result = body(self, &mut out);
        let defect = out.defect();
        let decisive = tolerance * self.config.tolerances.decisive_factor;
        let (verdict, error) = match result {
            Err(e) => (Verdict::Error, Some(e.to_string())),
            Ok(()) if group == TestGroup::Informational => (Verdict::Recorded, None),
            Ok(()) if defect <= tolerance => (Verdict::Pass, None),
            Ok(()) if group == TestGroup::Datri && defect <= decisive => (Verdict::Gray, None),
            Ok(()) => (Verdict::Fail, None),
        };
        self.records.push(TestRecord {
            name: name.into(),
            group,
            description: description.into(),
            samples: out.samples,
            defect,
            tolerance,
            verdict,
            error,
        });
    }
}

/// Runs every test on `setup` in declared order and classifies the model.
pub fn run_battery(setup: &ModelSetup, config: &BatteryConfig) -> DiagnosticsReport {
    let mut b = Battery {
        setup,
        config,
        scale: setup.working_radius / REFERENCE_WORKING_RADIUS,
        records: Vec::new(),
    };
    let tol = config.tolerances.clone();
    let curves = &setup.curves;

    b.run(
        "gauss_bonnet_sphere",
        TestGroup::Universal,
        "relative defect of sphere totals from 8π",
        tol.universal,
        |b, out| {
            for (i, p) in b.setup.base_points.iter().enumerate() {
                for r in &b.config.sphere_radii {
                    let r = r * b.scale;
                    let t = total_scalar_sphere_with(b.model(), p, r, &b.config.sphere)?;
                    out.push(format!("base {i} r={r:.4}"), (t - 8.0 * PI).abs() / (8.0 * PI));
                }
            }
            Ok(())
        },
    );

    b.run(
        "steiner_identity",
        TestGroup::Universal,
        "|Steiner residual| over sampled (u, r)",
        tol.universal,
        |b, out| {
            let n = b.config.steiner_samples;
            let dirs = halton_directions(n, b.config.seed.wrapping_add(1));
            for (i, d) in dirs.iter().enumerate() {
                let p = &b.setup.base_points[i % b.setup.base_points.len()];
                let u = unit_at(b.model(), p, d)?;
                let r = b.setup.working_radius * (0.1 + 0.7 * i as f64 / (n.max(2) - 1) as f64);
                let res = steiner_residual(b.model(), p, &u, r)?;
                out.push(format!("base {} r={r:.4}", i % b.setup.base_points.len()), res.abs());
            }
            Ok(())
        },
    );

    b.run(
        "capsule_closure",
        TestGroup::Universal,
        "relative defect of capsule totals from 8π",
        tol.capsule,
        |b, out| {
            let cases = curves
                .geodesics
                .iter()
                .map(|c| (c, b.config.capsule_radius))
                .chain(curves.arcs.iter().map(|c| (c, b.config.arc_capsule_radius)));
            for (c, r) in cases {
                let r = r * b.scale;
                let cap = capsule_total_with(b.model(), c, r, &b.config.tube, &b.config.sphere)?;
                out.push(
                    format!("{} r={r:.4}", curve_label(c)),
                    (cap.total() - 8.0 * PI).abs() / (8.0 * PI),
                );
            }
            Ok(())
        },
    );

    b.run(
        "torus_closure",
        TestGroup::Universal,
        "|tube total| about closed curves",
        tol.torus,
        |b, out| {
            for c in &curves.loops {
                for r in &b.config.tube_radii {
                    let r = r * b.scale;
                    let t = tube_total_with(b.model(), c, r, &b.config.tube)?;
                    out.push(
                        format!("{} r={r:.4} ∫|2K|dA={:.6}", curve_label(c), t.absolute),
                        t.total.abs(),
                    );
                }
            }
            Ok(())
        },
    );

    b.run(
        "hemisphere_additivity",
        TestGroup::Universal,
        "relative defect of opposite hemisphere sums from 8π",
        tol.universal,
        |b, out| {
            for (label, h) in hemisphere_pairs(b)? {
                out.push(label, (h[0] + h[1] - 8.0 * PI).abs() / (8.0 * PI));
            }
            Ok(())
        },
    );

    b.run(
        "series_consistency",
        TestGroup::Universal,
        "fitted a₀, a₁, a₂, a₃, b₋₂, b₋₁, b₀, b₁ against curvature formulas, \
         as |Δ| / max(1e-4, 1e-3·|prediction|)",
        1.0,
        |b, out| {
            for (i, u) in geodesic_starts(b).iter().enumerate() {
                let (a, bs) = series_for(b, u)?;
                let pred = series_prediction(b.model(), u)?;
                let checks = [
                    ("a0", a.coefficient(0), 1.0),
                    ("a1", a.coefficient(1), 0.0),
                    ("a2", a.coefficient(2), pred.a2),
                    ("a3", a.coefficient(3), pred.a3),
                    ("b-2", bs.coefficient(-2), 2.0),
                    ("b-1", bs.coefficient(-1), 0.0),
                    ("b0", bs.coefficient(0), pred.b0),
                    ("b1", bs.coefficient(1), pred.b1),
                ];
                for (name, got, want) in checks {
                    let scale = 1e-4_f64.max(1e-3 * want.abs());
                    out.push(format!("base {i} {name}"), (got - want).abs() / scale);
                }
            }
            Ok(())
        },
    );

    b.run(
        "cylinder_consistency",
        TestGroup::Universal,
        "|c₃ − mean â| / max(2e-3, 0.05·|mean â|) along each test geodesic",
        1.0,
        |b, out| {
            for (c, fit) in cylinder_fits(b)? {
                let scale = 2e-3_f64.max(0.05 * fit.mean_hat_a.abs());
                out.push(curve_label(c), (fit.c3() - fit.mean_hat_a).abs() / scale);
            }
            Ok(())
        },
    );

    b.run(
        "evenness",
        TestGroup::Datri,
        "max |θ(ru) − θ(−ru)| over sampled directions",
        tol.datri_pass,
        |b, out| {
            let r = b.config.evenness_radius * b.scale;
            for (i, p) in b.setup.base_points.iter().enumerate() {
                let d = evenness_defect(b.model(), p, r, b.config.evenness_samples, b.config.seed)?;
                out.push(format!("base {i} r={r:.4}"), d);
            }
            Ok(())
        },
    );

    b.run(
        "hemisphere_total",
        TestGroup::Datri,
        "relative defect of hemisphere totals from 4π",
        tol.hemisphere,
        |b, out| {
            for (label, h) in hemisphere_pairs(b)? {
                for (s, v) in ["+", "-"].iter().zip(h) {
                    out.push(format!("{label} {s}"), (v - 4.0 * PI).abs() / (4.0 * PI));
                }
            }
            Ok(())
        },
    );

    b.run(
        "hemisphere_equality",
        TestGroup::Datri,
        "|total(S⁺(v)) − total(S⁺(−v))|",
        tol.datri_pass,
        |b, out| {
            for (label, h) in hemisphere_pairs(b)? {
                out.push(label, (h[0] - h[1]).abs());
            }
            Ok(())
        },
    );

    b.run(
        "tube_vanishing",
        TestGroup::Datri,
        "|tube total| about open geodesic and non-geodesic axes",
        tol.datri_pass,
        |b, out| {
            for c in curves.geodesics.iter().chain(&curves.arcs) {
                for r in &b.config.tube_radii {
                    let r = r * b.scale;
                    let t = tube_total_with(b.model(), c, r, &b.config.tube)?;
                    out.push(format!("{} r={r:.4}", curve_label(c)), t.total.abs());
                }
            }
            Ok(())
        },
    );

    b.run(
        "cyclic_parallel_ricci",
        TestGroup::Datri,
        "max of |∇τ| and |∇_uρ(u,u)| at the base points",
        tol.datri_pass,
        |b, out| {
            for (i, p) in b.setup.base_points.iter().enumerate() {
                out.push(format!("base {i}"), cyclic_parallel_defect(b.model(), p)?);
            }
            Ok(())
        },
    );

    b.run(
        "odd_volume_coefficient",
        TestGroup::Datri,
        "|a₃| of the fitted volume-density series",
        tol.datri_pass,
        |b, out| {
            for (i, u) in geodesic_starts(b).iter().enumerate() {
                let (a, _) = series_for(b, u)?;
                out.push(format!("base {i}"), a.coefficient(3).abs());
            }
            Ok(())
        },
    );

    b.run(
        "coefficient_recursion",
        TestGroup::Datri,
        "|a_{k+2}(k+3)(k+4) − (C a_k + b_k)| for k = 0, 1, 2; refused models report the \
         cyclic-parallel defect",
        tol.datri_pass,
        |b, out| {
            let grid = series_grid(b);
            for (i, u) in geodesic_starts(b).iter().enumerate() {
                for k in 0..3 {
                    match recursion_residual(b.model(), u, k, &grid) {
                        Ok(v) => out.push(format!("base {i} k={k}"), v.abs()),
                        Err(GeometryError::NotCyclicParallel(d)) => {
                            out.push(format!("base {i} k={k} refused"), d);
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            Ok(())
        },
    );

    b.run(
        "cylinder_coefficient",
        TestGroup::Datri,
        "|c₃| of cylinder totals along each test geodesic",
        tol.datri_pass,
        |b, out| {
            for (c, fit) in cylinder_fits(b)? {
                out.push(curve_label(c), fit.c3().abs());
            }
            Ok(())
        },
    );

    b.run(
        "normal_curvature_profile",
        TestGroup::Datri,
        "largest of |a|, |b| and the fit residual of K(ν(t)) ≈ a t² + b t + c",
        tol.datri_pass,
        |b, out| {
            for (i, u) in geodesic_starts(b).iter().enumerate() {
                let (fit, _) = knu_profile(b.model(), u, &profile_grid(b))?;
                let d = fit
                    .coefficient(2)
                    .abs()
                    .max(fit.coefficient(1).abs())
                    .max(fit.residual);
                out.push(format!("base {i}"), d);
            }
            Ok(())
        },
    );

    b.run(
        "tau_sphere_evenness",
        TestGroup::Informational,
        "max |τ^S(ru) − τ^S(−ru)|; measured only, no implication claimed",
        f64::NAN,
        |b, out| {
            let r = b.config.evenness_radius * b.scale;
            let dirs = halton_directions(b.config.evenness_samples.min(32), b.config.seed);
            for (i, p) in b.setup.base_points.iter().enumerate() {
                out.push(format!("base {i} r={r:.4}"), tau_sphere_evenness_defect(b.model(), p, r, &dirs)?);
            }
            Ok(())
        },
    );

    b.run(
        "sphere_total_spread",
        TestGroup::Informational,
        "spread of sphere totals across base points; always 8π in dimension 3, so not evidence \
         about equal totals in higher dimensions",
        f64::NAN,
        |b, out| {
            let r = b.config.sphere_radii.get(1).copied().unwrap_or(0.4) * b.scale;
            let mut ts = Vec::new();
            for p in &b.setup.base_points {
                ts.push(total_scalar_sphere_with(b.model(), p, r, &b.config.sphere)?);
            }
            let hi = ts.iter().copied().fold(f64::MIN, f64::max);
            let lo = ts.iter().copied().fold(f64::MAX, f64::min);
            out.push(format!("r={r:.4}"), hi - lo);
            Ok(())
        },
    );

    let records = b.records;
    let failing_universal: Vec<String> = records
        .iter()
        .filter(|t| t.group == TestGroup::Universal && t.verdict != Verdict::Pass)
        .map(|t| t.name.clone())
        .collect();
    let classification = classify(&records, &failing_universal);
    DiagnosticsReport {
        model: setup.model.name.clone(),
        params: setup.model.params.clone(),
        expected: setup.expected,
        expectation_note: setup.rationale.clone(),
        classification,
        matches_expected: classification.matches(setup.expected),
        failing_universal,
        working_radius: setup.working_radius,
        base_points: setup.base_points.clone(),
        tests: records,
        config: config.clone(),
    }
}

/// The three tests that must agree with each other.
const TRIAD: [&str; 3] = ["evenness", "hemisphere_equality", "tube_vanishing"];

fn classify(records: &[TestRecord], failing_universal: &[String]) -> Classification {
    if !failing_universal.is_empty() {
        return Classification::Invalid;
    }
    let datri: Vec<&TestRecord> = records.iter().filter(|t| t.group == TestGroup::Datri).collect();
    if datri.iter().any(|t| t.verdict == Verdict::Error) {
        return Classification::Inconsistent;
    }
    if datri.iter().all(|t| t.verdict == Verdict::Pass) {
        return Classification::DatriConsistent;
    }
    let any_pass = datri.iter().any(|t| t.verdict == Verdict::Pass);
    let triad_fails = datri
        .iter()
        .filter(|t| TRIAD.contains(&t.name.as_str()))
        .all(|t| t.verdict == Verdict::Fail);
    if !any_pass && triad_fails {
        Classification::NotDatri
    } else {
        Classification::Inconsistent
    }
}

fn geodesic_starts(b: &Battery) -> Vec<TangentVector> {
    b.setup
        .curves
        .geodesics
        .iter()
        .filter_map(|c| match c {
            RegularCurve::Geodesic { start, .. } => Some(*start),
            RegularCurve::Arc { .. } => None,
        })
        .collect()
}

fn series_grid(b: &Battery) -> SeriesGrid {
    SeriesGrid::for_working_radius(b.setup.working_radius)
}

fn series_for(b: &Battery, u: &TangentVector) -> Result<(crate::series::SeriesFit, crate::series::SeriesFit)> {
    sphere_series(b.model(), u, b.config.series_k_max, &series_grid(b))
}

fn profile_grid(b: &Battery) -> Vec<f64> {
    let length = match b.setup.curves.geodesics.first() {
        Some(RegularCurve::Geodesic { b: end, .. }) => *end,
        _ => 1.0,
    };
    (0..=10).map(|i| length * i as f64 / 10.0).collect()
}

fn cylinder_fits<'a>(b: &Battery<'a>) -> Result<Vec<(&'a RegularCurve, crate::tube::CylinderFit)>> {
    let radii = cylinder_radii(b.setup.working_radius);
    b.setup
        .curves
        .geodesics
        .iter()
        .map(|c| Ok((c, cylinder_coefficient(b.model(), c, &radii, &b.config.tube)?)))
        .collect()
}

/// `(label, [total(S⁺(v)), total(S⁺(−v))])` for the sampled axes; base
/// points are visited cyclically.
fn hemisphere_pairs(b: &Battery) -> Result<Vec<(String, [f64; 2])>> {
    let r = b.config.hemisphere_radius * b.scale;
    let n = b.setup.base_points.len();
    let mut out = Vec::new();
    for (i, d) in halton_directions(b.config.hemisphere_axes, b.config.seed.wrapping_add(2))
        .iter()
        .enumerate()
    {
        let p = b.setup.base_points[i % n];
        let u = unit_at(b.model(), &p, d)?;
        let mut h = [0.0; 2];
        for (k, s) in [1.0, -1.0].into_iter().enumerate() {
            h[k] = total_scalar_hemisphere_with(b.model(), &TangentVector::new(p, u * (s * r)), &b.config.sphere)?;
        }
        out.push((format!("base {} axis {i} r={r:.4}", i % n), h));
    }
    Ok(out)
}
