//! Tubes about regular curves, their intrinsic curvature and totals,
//! capsules, and the small-radius behaviour of cylinders.
//!
//! The tube point `(t, φ)` at radius `r` is `exp_{γ(t)}(r E)` with
//! `E = cos φ N₂ + sin φ N₃`, where `(N₂, N₃)` is transported along `γ` in the
//! normal bundle. The outward normal is the radial velocity `∂_r`; with that
//! choice a Euclidean cylinder has `II = diag(0, r)` in `(∂_t, ∂_φ)`.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::geodesic::{
    complete_frame, in_chart, jacobi_radii, parallel_frame_geodesic, put3, v3, ExplicitPath,
    TangentVector,
};
use crate::metric::{ricci_jet, ChartPoint, MetricModel, Vec3};
use crate::ode::{integrate_through, OdeSettings, OdeSystem};
use crate::quadrature::{KahanSum, RectangleRule};
use crate::series::{fit_polynomial, fit_powers, SeriesFit};
use crate::sphere::{total_scalar_hemisphere_with, SphereSettings};

/// Circle `c + ρ(cos t e₁ + sin t e₂)`, `t ∈ [0, 2π]`, in chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartCircle {
    pub center: [f64; 3],
    pub e1: [f64; 3],
    pub e2: [f64; 3],
    pub radius: f64,
}

impl ExplicitPath for ChartCircle {
    fn position(&self, t: f64) -> Vec3 {
        Vec3::from(self.center)
            + (Vec3::from(self.e1) * t.cos() + Vec3::from(self.e2) * t.sin()) * self.radius
    }

    fn velocity(&self, t: f64) -> Vec3 {
        (Vec3::from(self.e2) * t.cos() - Vec3::from(self.e1) * t.sin()) * self.radius
    }

    fn acceleration(&self, t: f64) -> Vec3 {
        -(Vec3::from(self.e1) * t.cos() + Vec3::from(self.e2) * t.sin()) * self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RegularCurve {
    /// `t ↦ exp_start(t·velocity)` on `[a, b]`, `a ≤ 0 ≤ b`.
    Geodesic {
        start: TangentVector,
        a: f64,
        b: f64,
    },
    /// Arc `[a, b]` of a chart circle; smoothly closed when `b − a = 2π`.
    /// Not geodesic in general, not unit speed.
    Arc {
        circle: ChartCircle,
        a: f64,
        b: f64,
    },
}

/// Curve data at one parameter value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisSample {
    pub t: f64,
    pub point: ChartPoint,
    pub velocity: Vec3,
    /// `∇_t γ′`
    pub acceleration: Vec3,
    /// Orthonormal frame of `γ′^⊥`, transported in the normal bundle.
    pub normals: [Vec3; 2],
}

impl RegularCurve {
    pub fn geodesic(start: TangentVector, length: f64) -> Self {
        RegularCurve::Geodesic {
            start,
            a: 0.0,
            b: length,
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        match self {
            RegularCurve::Geodesic { a, b, .. } => (*a, *b),
            RegularCurve::Arc { a, b, .. } => (*a, *b),
        }
    }

    pub fn closed_circle(circle: ChartCircle) -> Self {
        RegularCurve::Arc {
            circle,
            a: 0.0,
            b: 2.0 * std::f64::consts::PI,
        }
    }

    pub fn is_closed(&self) -> bool {
        match self {
            RegularCurve::Geodesic { .. } => false,
            RegularCurve::Arc { a, b, .. } => ((b - a) - 2.0 * std::f64::consts::PI).abs() < 1e-12,
        }
    }

    pub fn is_geodesic(&self) -> bool {
        matches!(self, RegularCurve::Geodesic { .. })
    }

    /// Samples at increasing `ts` inside the parameter interval.
    pub fn samples(&self, model: &MetricModel, ts: &[f64]) -> Result<Vec<AxisSample>> {
        let (a, b) = self.interval();
        if ts.windows(2).any(|w| w[1] < w[0]) || ts.iter().any(|t| *t < a || *t > b) {
            return Err(GeometryError::InvalidArgument(
                "curve parameters must be increasing and inside the interval".into(),
            ));
        }
        match self {
            RegularCurve::Geodesic { start, .. } => geodesic_samples(model, start, ts),
            RegularCurve::Arc { circle, a, .. } => path_samples(model, circle, *a, ts),
        }
    }

    /// Largest `|∇_tγ′|_g / |γ′|²_g` over the given parameters; zero up to
    /// integration error for geodesics.
    pub fn geodesic_residual(&self, model: &MetricModel, ts: &[f64]) -> Result<f64> {
        let mut worst = 0.0_f64;
        for s in self.samples(model, ts)? {
            let v2 = model.inner(&s.point, &s.velocity, &s.velocity)?;
            worst = worst.max(model.norm(&s.point, &s.acceleration)? / v2);
        }
        Ok(worst)
    }
}

fn geodesic_samples(model: &MetricModel, start: &TangentVector, ts: &[f64]) -> Result<Vec<AxisSample>> {
    let p = start.base;
    let v = start.vec();
    let g = model.metric_at(&p)?;
    let speed = model.norm(&p, &v)?;
    if speed <= 0.0 {
        return Err(GeometryError::InvalidArgument("zero velocity".into()));
    }
    let f = complete_frame(&g, &(v / speed));
    let seed = [v, f[1], f[2]];
    let neg: Vec<f64> = ts.iter().copied().filter(|t| *t < 0.0).rev().collect();
    let pos: Vec<f64> = ts.iter().copied().filter(|t| *t >= 0.0).collect();
    let mut states = parallel_frame_geodesic(model, &p, &seed, &neg)?;
    states.reverse();
    states.extend(parallel_frame_geodesic(model, &p, &seed, &pos)?);
    Ok(ts
        .iter()
        .zip(states)
        .map(|(&t, (point, fr))| AxisSample {
            t,
            point,
            velocity: fr[0],
            acceleration: Vec3::zeros(),
            normals: [fr[1], fr[2]],
        })
        .collect())
}

/// `∇_t N = −⟨N, ∇_tγ′⟩ γ′/|γ′|²`: keeps `N ⟂ γ′` with no rotation inside
/// the normal plane.
struct NormalTransport<'a, P: ExplicitPath> {
    model: &'a MetricModel,
    path: &'a P,
}

impl<P: ExplicitPath> NormalTransport<'_, P> {
    fn kinematics(&self, t: f64) -> Result<(ChartPoint, Vec3, Vec3, crate::metric::Connection)> {
        let x = self.path.position(t);
        let x = in_chart(self.model, x.as_slice(), t)?;
        let conn = self.model.connection_unchecked(&x);
        let v = self.path.velocity(t);
        let acc = self.path.acceleration(t) + conn.contract(&v, &v);
        Ok((ChartPoint { coords: x }, v, acc, conn))
    }
}

impl<P: ExplicitPath> OdeSystem<6> for NormalTransport<'_, P> {
    fn rhs(&self, t: f64, y: &[f64; 6], dy: &mut [f64; 6]) -> Result<()> {
        let (_, v, acc, conn) = self.kinematics(t)?;
        let v2 = conn.inner(&v, &v);
        for k in 0..2 {
            let n = v3(y, 3 * k);
            let d = -conn.contract(&v, &n) - v * (conn.inner(&n, &acc) / v2);
            put3(dy, 3 * k, &d);
        }
        Ok(())
    }
}

fn path_samples<P: ExplicitPath>(model: &MetricModel, path: &P, t0: f64, ts: &[f64]) -> Result<Vec<AxisSample>> {
    let sys = NormalTransport { model, path };
    let (p0, v0, _, _) = sys.kinematics(t0)?;
    let g = model.metric_at(&p0)?;
    let f = complete_frame(&g, &(v0 / model.norm(&p0, &v0)?));
    let mut y0 = [0.0; 6];
    put3(&mut y0, 0, &f[1]);
    put3(&mut y0, 3, &f[2]);
    let states = integrate_through(&sys, t0, y0, ts, &OdeSettings::default(), |_, _| Ok(()), None)?;
    ts.iter()
        .zip(states)
        .map(|(&t, y)| {
            let (point, velocity, acceleration, _) = sys.kinematics(t)?;
            Ok(AxisSample {
                t,
                point,
                velocity,
                acceleration,
                normals: [v3(&y, 0), v3(&y, 3)],
            })
        })
        .collect()
}

/// Tube geometry at one parameter point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TubePoint {
    pub point: ChartPoint,
    /// First fundamental form in `(∂_t, ∂_φ)`.
    pub first: Matrix2<f64>,
    /// Second fundamental form `II_ij = ⟨J_i′, J_j⟩`, as computed (not
    /// symmetrized).
    pub second: Matrix2<f64>,
    /// Outward unit normal `∂_r`.
    pub normal: Vec3,
    /// Tangent vectors `(∂_t, ∂_φ)` in chart components.
    pub tangents: [Vec3; 2],
    /// Sectional curvature of the ambient tangent plane.
    pub ambient_curvature: f64,
}

impl TubePoint {
    pub fn area_element(&self) -> f64 {
        self.first.determinant().sqrt()
    }

    /// Intrinsic Gauss curvature of the tube.
    pub fn gauss_curvature(&self) -> f64 {
        let s = 0.5 * (self.second + self.second.transpose());
        self.ambient_curvature + s.determinant() / self.first.determinant()
    }

    pub fn second_asymmetry(&self) -> f64 {
        (self.second[(0, 1)] - self.second[(1, 0)]).abs()
    }
}

/// Tube geometry over an axis sample at angle `φ` and radius `r`.
pub fn tube_point(model: &MetricModel, s: &AxisSample, phi: f64, r: f64, ode: &OdeSettings) -> Result<TubePoint> {
    let speed = model.norm(&s.point, &s.velocity)?;
    let tangent = s.velocity / speed;
    let (c, sn) = (phi.cos(), phi.sin());
    let e = s.normals[0] * c + s.normals[1] * sn;
    let e_phi = s.normals[1] * c - s.normals[0] * sn;
    let jt = jacobi_radii(model, &s.point, &[e, tangent, e_phi], &[r], ode)?.remove(0);
    let bend = model.inner(&s.point, &e, &s.acceleration)? / speed;
    // initial data in the frame (T̂, ∂_φE)
    let jt0 = Vector2::new(speed, 0.0);
    let jt0p = Vector2::new(-bend, 0.0);
    let jp0p = Vector2::new(0.0, 1.0);
    let j_t = jt.c * jt0 + jt.a * jt0p;
    let j_t_p = jt.c_prime * jt0 + jt.a_prime * jt0p;
    let j_p = jt.a * jp0p;
    let j_p_p = jt.a_prime * jp0p;
    // signed area of (J_t, J_φ); non-positive at a fold
    let signed = j_t[0] * j_p[1] - j_t[1] * j_p[0];
    if !(signed > 0.0) {
        return Err(GeometryError::ImmersionFailure(signed));
    }
    let first = Matrix2::new(j_t.dot(&j_t), j_t.dot(&j_p), j_p.dot(&j_t), j_p.dot(&j_p));
    let second = Matrix2::new(j_t_p.dot(&j_t), j_t_p.dot(&j_p), j_p_p.dot(&j_t), j_p_p.dot(&j_p));
    let (ric, tau) = model.connection(&jt.point)?.ricci_and_scalar();
    let nu = jt.frame[0];
    let to_chart = |j: &Vector2<f64>| jt.frame[1] * j[0] + jt.frame[2] * j[1];
    Ok(TubePoint {
        point: jt.point,
        first,
        second,
        normal: nu,
        tangents: [to_chart(&j_t), to_chart(&j_p)],
        ambient_curvature: 0.5 * tau - nu.dot(&(ric * nu)),
    })
}

/// `tube_point` for a single curve parameter.
pub fn tube_geometry_at(model: &MetricModel, curve: &RegularCurve, t: f64, phi: f64, r: f64) -> Result<TubePoint> {
    let s = curve.samples(model, &[t])?.remove(0);
    tube_point(model, &s, phi, r, &OdeSettings::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TubeSettings {
    pub t_nodes: usize,
    pub phi_nodes: usize,
    pub ode: OdeSettings,
}

impl Default for TubeSettings {
    fn default() -> Self {
        TubeSettings {
            t_nodes: 32,
            phi_nodes: 64,
            ode: OdeSettings::default(),
        }
    }
}

/// Result of integrating over the tube parameter rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeTotal {
    /// `∫∫ 2K √det I dφ dt`
    pub total: f64,
    /// `∫∫ |2K| √det I dφ dt`
    pub absolute: f64,
    pub area: f64,
    pub max_second_asymmetry: f64,
}

/// Integrates the tube of radius `r` about `curve`.
pub fn tube_total_with(model: &MetricModel, curve: &RegularCurve, r: f64, settings: &TubeSettings) -> Result<TubeTotal> {
    if r <= 0.0 {
        return Err(GeometryError::InvalidArgument("radius must be positive".into()));
    }
    let (a, b) = curve.interval();
    let rule = RectangleRule::new(settings.t_nodes, settings.phi_nodes, a, b);
    let samples = curve.samples(model, &rule.t_nodes)?;
    let jobs: Vec<(usize, f64)> = (0..samples.len())
        .flat_map(|i| rule.phi_nodes.iter().map(move |&phi| (i, phi)))
        .collect();
    let points: Vec<TubePoint> = jobs
        .par_iter()
        .map(|&(i, phi)| tube_point(model, &samples[i], phi, r, &settings.ode))
        .collect::<Result<_>>()?;
    let mut total = KahanSum::default();
    let mut absolute = KahanSum::default();
    let mut area = KahanSum::default();
    let mut asym = 0.0_f64;
    for (&(i, _), tp) in jobs.iter().zip(&points) {
        let w = rule.t_weights[i] * rule.phi_weight;
        let da = tp.area_element();
        let k2 = 2.0 * tp.gauss_curvature();
        total.add(w * k2 * da);
        absolute.add(w * k2.abs() * da);
        area.add(w * da);
        asym = asym.max(tp.second_asymmetry());
    }
    Ok(TubeTotal {
        total: total.total(),
        absolute: absolute.total(),
        area: area.total(),
        max_second_asymmetry: asym,
    })
}

/// Total scalar curvature of the tube of radius `r` about `curve`.
pub fn total_scalar_tube(model: &MetricModel, curve: &RegularCurve, r: f64) -> Result<f64> {
    Ok(tube_total_with(model, curve, r, &TubeSettings::default())?.total)
}

/// Tube plus the end hemispheres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapsuleTotal {
    pub tube: f64,
    pub start_cap: f64,
    pub end_cap: f64,
}

impl CapsuleTotal {
    pub fn total(&self) -> f64 {
        self.tube + self.start_cap + self.end_cap
    }
}

pub fn capsule_total_with(
    model: &MetricModel,
    curve: &RegularCurve,
    r: f64,
    tube: &TubeSettings,
    sphere: &SphereSettings,
) -> Result<CapsuleTotal> {
    if curve.is_closed() {
        return Err(GeometryError::InvalidArgument("capsules need an open curve".into()));
    }
    let (a, b) = curve.interval();
    let ends = curve.samples(model, &[a, b])?;
    let cap = |s: &AxisSample, sign: f64| -> Result<f64> {
        let dir = s.velocity / model.norm(&s.point, &s.velocity)?;
        total_scalar_hemisphere_with(model, &TangentVector::new(s.point, dir * (sign * r)), sphere)
    };
    Ok(CapsuleTotal {
        tube: tube_total_with(model, curve, r, tube)?.total,
        start_cap: cap(&ends[0], -1.0)?,
        end_cap: cap(&ends[1], 1.0)?,
    })
}

/// Total scalar curvature of the capsule of radius `r` about `curve`.
pub fn capsule_total(model: &MetricModel, curve: &RegularCurve, r: f64) -> Result<f64> {
    Ok(capsule_total_with(model, curve, r, &TubeSettings::default(), &SphereSettings::default())?.total())
}

/// Odd-power fit of cylinder totals against the covariant prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderFit {
    /// `T(r) / (2πL/6) ≈ c₃ r³ + c₅ r⁵`
    pub fit: SeriesFit,
    pub totals: Vec<f64>,
    /// Mean of `∇²τ(γ′,γ′) − 2∇²ρ(γ′,γ′,γ′,γ′)` along the axis.
    pub mean_hat_a: f64,
}

impl CylinderFit {
    pub fn c3(&self) -> f64 {
        self.fit.coefficient(3)
    }
}

/// Cylinder radii `{0.08, 0.12, 0.16, 0.20, 0.24}·working_radius`.
pub fn cylinder_radii(working_radius: f64) -> Vec<f64> {
    [0.08, 0.12, 0.16, 0.20, 0.24]
        .iter()
        .map(|f| f * working_radius)
        .collect()
}

/// Fits the `r³` coefficient of cylinder totals about a unit-speed geodesic.
pub fn cylinder_coefficient(
    model: &MetricModel,
    geodesic: &RegularCurve,
    r_grid: &[f64],
    settings: &TubeSettings,
) -> Result<CylinderFit> {
    let RegularCurve::Geodesic { start, a, b } = geodesic else {
        return Err(GeometryError::InvalidArgument("cylinder axis must be a geodesic".into()));
    };
    model.require_unit(&start.base, &start.vec())?;
    let length = b - a;
    let totals: Vec<f64> = r_grid
        .iter()
        .map(|&r| Ok(tube_total_with(model, geodesic, r, settings)?.total))
        .collect::<Result<_>>()?;
    let scale = 2.0 * std::f64::consts::PI * length / 6.0;
    let ys: Vec<f64> = totals.iter().map(|t| t / scale).collect();
    let peak = ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
    let threshold = 1e-3 * peak + 1e-9;
    let fit = fit_powers(r_grid, &ys, &[3, 5], threshold)?;
    let rule = RectangleRule::new(settings.t_nodes, 1, *a, *b);
    let mut acc = KahanSum::default();
    for (s, w) in geodesic.samples(model, &rule.t_nodes)?.iter().zip(&rule.t_weights) {
        let jet = ricci_jet(model, &s.point)?;
        acc.add(w * (jet.nabla2_tau_uu(&s.velocity) - 2.0 * jet.nabla2_ricci_uu(&s.velocity)));
    }
    Ok(CylinderFit {
        fit,
        totals,
        mean_hat_a: acc.total() / length,
    })
}

/// Quadratic fit of `K(ν(t)) = ½τ − ρ(γ′,γ′)` along `γ_u` over `t_grid`
/// (increasing); coefficients are `(c, b, a)` for `a t² + b t + c`.
pub fn knu_profile(model: &MetricModel, u: &TangentVector, t_grid: &[f64]) -> Result<(SeriesFit, Vec<f64>)> {
    model.require_unit(&u.base, &u.vec())?;
    let lo = t_grid.iter().copied().fold(0.0, f64::min);
    let hi = t_grid.iter().copied().fold(0.0, f64::max);
    let curve = RegularCurve::Geodesic { start: *u, a: lo, b: hi };
    let values: Vec<f64> = curve
        .samples(model, t_grid)?
        .iter()
        .map(|s| {
            let (ric, tau) = model.connection(&s.point)?.ricci_and_scalar();
            Ok(0.5 * tau - s.velocity.dot(&(ric * s.velocity)))
        })
        .collect::<Result<_>>()?;
    Ok((fit_polynomial(t_grid, &values, 2, f64::INFINITY)?, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{ChartBox, ModelKind};
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn model(kind: ModelKind, half: f64) -> MetricModel {
        MetricModel::new("test", BTreeMap::new(), kind, ChartBox::cube(half))
    }

    fn small() -> TubeSettings {
        TubeSettings {
            t_nodes: 8,
            phi_nodes: 16,
            ..Default::default()
        }
    }

    #[test]
    fn euclidean_cylinder_forms() {
        let m = model(ModelKind::Euclidean, 10.0);
        let axis = RegularCurve::geodesic(TangentVector::new(ChartPoint::origin(), Vec3::z()), 1.0);
        let tp = tube_geometry_at(&m, &axis, 0.4, 0.7, 0.3).unwrap();
        assert!((tp.first - Matrix2::new(1.0, 0.0, 0.0, 0.09)).abs().max() < 1e-12);
        assert!((tp.second - Matrix2::new(0.0, 0.0, 0.0, 0.3)).abs().max() < 1e-12);
        assert!(tp.gauss_curvature().abs() < 1e-12);
        let t = tube_total_with(&m, &axis, 0.3, &small()).unwrap();
        assert!(t.total.abs() < 1e-12);
        assert!((t.area - 2.0 * PI * 0.3).abs() < 1e-12);
    }

    #[test]
    fn euclidean_torus_vanishes() {
        let m = model(ModelKind::Euclidean, 10.0);
        let c = RegularCurve::closed_circle(ChartCircle {
            center: [0.0; 3],
            e1: [1.0, 0.0, 0.0],
            e2: [0.0, 1.0, 0.0],
            radius: 1.0,
        });
        let t = tube_total_with(&m, &c, 0.3, &TubeSettings::default()).unwrap();
        assert!(t.total.abs() < 1e-9, "{}", t.total);
        assert!((t.area - 4.0 * PI * PI * 0.3).abs() < 1e-9);
    }

    #[test]
    fn great_circle_tube_is_flat() {
        let m = model(ModelKind::SpaceForm { kappa: 1.0 }, 1.5);
        let axis = RegularCurve::geodesic(TangentVector::new(ChartPoint::origin(), Vec3::x() * 0.5), 1.0);
        let tp = tube_geometry_at(&m, &axis, 0.5, 1.1, 0.4).unwrap();
        assert!(tp.gauss_curvature().abs() < 1e-9);
        assert!((tp.ambient_curvature - 1.0).abs() < 1e-9);
    }

    #[test]
    fn euclidean_capsule() {
        let m = model(ModelKind::Euclidean, 10.0);
        let axis = RegularCurve::geodesic(TangentVector::new(ChartPoint::origin(), Vec3::y()), 1.0);
        let s = SphereSettings {
            polar_nodes: 8,
            azimuth_nodes: 16,
            ..Default::default()
        };
        let c = capsule_total_with(&m, &axis, 0.3, &small(), &s).unwrap();
        assert!((c.total() - 8.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn round_sphere_knu_profile_constant() {
        let m = model(ModelKind::SpaceForm { kappa: 1.0 }, 1.5);
        let u = TangentVector::new(ChartPoint::origin(), Vec3::new(0.0, 0.5, 0.0));
        let ts: Vec<f64> = (0..9).map(|i| -0.4 + 0.1 * i as f64).collect();
        let (fit, _) = knu_profile(&m, &u, &ts).unwrap();
        assert!((fit.coefficient(0) - 1.0).abs() < 1e-10);
        assert!(fit.coefficient(1).abs() < 1e-10);
        assert!(fit.coefficient(2).abs() < 1e-10);
        assert!(fit.residual < 1e-10);
    }
}
