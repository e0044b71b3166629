//! Scalar curvature of geodesic spheres, sphere and hemisphere totals, and
//! the radial series of the volume density.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::geodesic::{complete_frame, jacobi_radii, JacobiTransport, TangentVector};
use crate::metric::{ricci_jet, ChartPoint, MetricModel, Vec3};
use crate::ode::OdeSettings;
use crate::quadrature::{halton_directions, QuadratureRule};
use crate::series::{fit_signed, geometric_radii, SeriesFit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SphereSettings {
    pub polar_nodes: usize,
    pub azimuth_nodes: usize,
    pub ode: OdeSettings,
}

impl Default for SphereSettings {
    fn default() -> Self {
        SphereSettings {
            polar_nodes: 24,
            azimuth_nodes: 48,
            ode: OdeSettings::default(),
        }
    }
}

/// Radii grid and acceptance threshold for series fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub threshold: f64,
}

impl SeriesGrid {
    /// 12 radii in `[0.05, 0.5]·working_radius`.
    pub fn for_working_radius(working_radius: f64) -> Self {
        SeriesGrid {
            lo: 0.05 * working_radius,
            hi: 0.5 * working_radius,
            points: 12,
            threshold: 1e-8,
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        geometric_radii(self.lo, self.hi, self.points)
    }
}

/// `τ^S` at the end point of `jt`, from the contracted Gauss equation
/// `τ^S = τ − 2ρ(ξ,ξ) + H² − ‖S‖²`.
pub fn tau_sphere_at(model: &MetricModel, jt: &JacobiTransport) -> Result<f64> {
    let s = jt.shape_operator()?;
    let (ric, tau) = model.connection(&jt.point)?.ricci_and_scalar();
    let xi = &jt.frame[0];
    let h = s.trace();
    Ok(tau - 2.0 * quad(&ric, xi) + h * h - s.norm_squared())
}

fn quad(m: &Matrix3<f64>, v: &Vec3) -> f64 {
    v.dot(&(m * v))
}

/// Scalar curvature `τ^S(v)` of the geodesic sphere `S_p(‖v‖)` at `exp_p(v)`.
pub fn tau_sphere(model: &MetricModel, v: &TangentVector) -> Result<f64> {
    let (u, r) = split(model, v)?;
    tau_sphere_at(model, &transport(model, &v.base, &u, r, &OdeSettings::default())?)
}

fn split(model: &MetricModel, v: &TangentVector) -> Result<(Vec3, f64)> {
    let r = v.norm(model)?;
    if r <= 0.0 {
        return Err(GeometryError::InvalidArgument("zero radius".into()));
    }
    Ok((v.vec() / r, r))
}

fn transport(
    model: &MetricModel,
    p: &ChartPoint,
    u: &Vec3,
    r: f64,
    ode: &OdeSettings,
) -> Result<JacobiTransport> {
    let frame = complete_frame(&model.metric_at(p)?, u);
    Ok(jacobi_radii(model, p, &frame, &[r], ode)?.remove(0))
}

/// `(ρ(γ′,γ′) + τ^S − τ)θ − (∂²_rθ + 4∂_rθ/r + 2θ/r²)` at `exp_p(ru)`.
pub fn steiner_residual(model: &MetricModel, p: &ChartPoint, u: &Vec3, r: f64) -> Result<f64> {
    model.require_unit(p, u)?;
    let jt = transport(model, p, u, r, &OdeSettings::default())?;
    let tau_s = tau_sphere_at(model, &jt)?;
    let (ric, tau) = model.connection(&jt.point)?.ricci_and_scalar();
    let (th, d1, d2) = jt.volume_density_derivatives();
    let lhs = (quad(&ric, &jt.frame[0]) + tau_s - tau) * th;
    let rhs = d2 + 4.0 * d1 / r + 2.0 * th / (r * r);
    Ok(lhs - rhs)
}

/// `τ^S(ru)·θ(ru)·r²` for each direction, evaluated in parallel.
fn integrand(
    model: &MetricModel,
    p: &ChartPoint,
    dirs: &[Vec3],
    r: f64,
    ode: &OdeSettings,
) -> Result<Vec<f64>> {
    let g = model.metric_at(p)?;
    dirs.par_iter()
        .map(|u| {
            let frame = complete_frame(&g, u);
            let jt = jacobi_radii(model, p, &frame, &[r], ode)?.remove(0);
            Ok(tau_sphere_at(model, &jt)? * jt.a.determinant())
        })
        .collect()
}

/// Total scalar curvature of the geodesic sphere `S_p(r)`.
pub fn total_scalar_sphere(model: &MetricModel, p: &ChartPoint, r: f64) -> Result<f64> {
    total_scalar_sphere_with(model, p, r, &SphereSettings::default())
}

pub fn total_scalar_sphere_with(
    model: &MetricModel,
    p: &ChartPoint,
    r: f64,
    settings: &SphereSettings,
) -> Result<f64> {
    if r <= 0.0 {
        return Err(GeometryError::InvalidArgument("radius must be positive".into()));
    }
    let rule = QuadratureRule::sphere(settings.polar_nodes, settings.azimuth_nodes);
    let basis = model.orthonormal_basis(p)?;
    let values = integrand(model, p, &rule.directions(&basis), r, &settings.ode)?;
    Ok(rule.apply(&values))
}

/// Total scalar curvature of the geodesic hemisphere with axis `v`,
/// radius `‖v‖`.
pub fn total_scalar_hemisphere(model: &MetricModel, v: &TangentVector) -> Result<f64> {
    total_scalar_hemisphere_with(model, v, &SphereSettings::default())
}

pub fn total_scalar_hemisphere_with(
    model: &MetricModel,
    v: &TangentVector,
    settings: &SphereSettings,
) -> Result<f64> {
    let (axis, r) = split(model, v)?;
    let rule = QuadratureRule::hemisphere(settings.polar_nodes, settings.azimuth_nodes);
    let f = complete_frame(&model.metric_at(&v.base)?, &axis);
    let values = integrand(model, &v.base, &rule.directions(&[f[1], f[2], f[0]]), r, &settings.ode)?;
    Ok(rule.apply(&values))
}

/// Samples along `±u` on the grid, `(θ, τ^Sθ)` for each sign.
struct SignedSamples {
    radii: Vec<f64>,
    theta: [Vec<f64>; 2],
    tau_s_theta: [Vec<f64>; 2],
}

fn signed_samples(model: &MetricModel, u: &TangentVector, grid: &SeriesGrid) -> Result<SignedSamples> {
    model.require_unit(&u.base, &u.vec())?;
    let radii = grid.radii();
    let g = model.metric_at(&u.base)?;
    let mut theta: [Vec<f64>; 2] = Default::default();
    let mut tst: [Vec<f64>; 2] = Default::default();
    for (i, sign) in [1.0, -1.0].into_iter().enumerate() {
        let frame = complete_frame(&g, &(u.vec() * sign));
        for jt in jacobi_radii(model, &u.base, &frame, &radii, &OdeSettings::default())? {
            let th = jt.volume_density();
            theta[i].push(th);
            tst[i].push(tau_sphere_at(model, &jt)? * th);
        }
    }
    Ok(SignedSamples {
        radii,
        theta,
        tau_s_theta: tst,
    })
}

/// Fit of `θ(ru) = Σ a_k r^k` for `0 ≤ k ≤ k_max`.
pub fn theta_series(model: &MetricModel, u: &TangentVector, k_max: i32, grid: &SeriesGrid) -> Result<SeriesFit> {
    let s = signed_samples(model, u, grid)?;
    fit_signed(&s.radii, &s.theta[0], &s.theta[1], 0, k_max, grid.threshold)
}

/// Laurent fit of `τ^S(ru)θ(ru) = Σ b_k r^k` for `−2 ≤ k ≤ k_max`.
pub fn tau_s_theta_series(
    model: &MetricModel,
    u: &TangentVector,
    k_max: i32,
    grid: &SeriesGrid,
) -> Result<SeriesFit> {
    let s = signed_samples(model, u, grid)?;
    fit_signed(&s.radii, &s.tau_s_theta[0], &s.tau_s_theta[1], -2, k_max, grid.threshold)
}

/// Both fits from one set of radial integrations.
pub fn sphere_series(
    model: &MetricModel,
    u: &TangentVector,
    k_max: i32,
    grid: &SeriesGrid,
) -> Result<(SeriesFit, SeriesFit)> {
    let s = signed_samples(model, u, grid)?;
    Ok((
        fit_signed(&s.radii, &s.theta[0], &s.theta[1], 0, k_max, grid.threshold)?,
        fit_signed(&s.radii, &s.tau_s_theta[0], &s.tau_s_theta[1], -2, k_max, grid.threshold)?,
    ))
}

/// Curvature-tensor predictions for the low-order coefficients in
/// direction `u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPrediction {
    /// `−ρ(u,u)/6`
    pub a2: f64,
    /// `−∇_uρ(u,u)/12`
    pub a3: f64,
    /// `τ − 3ρ(u,u)`
    pub b0: f64,
    /// `∇_uτ − (8/3)∇_uρ(u,u)`
    pub b1: f64,
}

pub fn series_prediction(model: &MetricModel, u: &TangentVector) -> Result<SeriesPrediction> {
    model.require_unit(&u.base, &u.vec())?;
    let jet = ricci_jet(model, &u.base)?;
    let rho = quad(&jet.ricci, &u.vec());
    let drho = jet.nabla_ricci_uuu(&u.vec());
    let dtau = jet.nabla_tau_u(&u.vec());
    Ok(SeriesPrediction {
        a2: -rho / 6.0,
        a3: -drho / 12.0,
        b0: jet.tau - 3.0 * rho,
        b1: dtau - 8.0 / 3.0 * drho,
    })
}

/// Tolerance for the cyclic-parallel and constant-`τ` precondition of
/// [`recursion_residual`].
pub const CYCLIC_TOLERANCE: f64 = 1e-8;

/// Largest of `|∇τ|` and `|∇_wρ(w,w)|` over a spread of unit `w` at `p`.
pub fn cyclic_parallel_defect(model: &MetricModel, p: &ChartPoint) -> Result<f64> {
    let jet = ricci_jet(model, p)?;
    let basis = model.orthonormal_basis(p)?;
    let mut defect = jet.nabla_tau.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    for d in halton_directions(16, 0) {
        let w = basis[0] * d[0] + basis[1] * d[1] + basis[2] * d[2];
        defect = defect.max(jet.nabla_ricci_uuu(&w).abs());
    }
    Ok(defect)
}

/// `a_{k+2}(k+3)(k+4) − (C a_k + b_k)` with `C = ρ(γ′,γ′) − τ`, from fitted
/// series along `γ_u`. Refuses models where `C` is not constant along the
/// geodesic.
pub fn recursion_residual(model: &MetricModel, u: &TangentVector, k: i32, grid: &SeriesGrid) -> Result<f64> {
    model.require_unit(&u.base, &u.vec())?;
    let defect = cyclic_parallel_defect(model, &u.base)?;
    if defect > CYCLIC_TOLERANCE {
        return Err(GeometryError::NotCyclicParallel(defect));
    }
    let (ric, tau) = model.connection(&u.base)?.ricci_and_scalar();
    let c = quad(&ric, &u.vec()) - tau;
    let far = transport(model, &u.base, &u.vec(), grid.hi, &OdeSettings::default())?;
    let (ric_far, tau_far) = model.connection(&far.point)?.ricci_and_scalar();
    let drift = (quad(&ric_far, &far.frame[0]) - tau_far - c).abs();
    if drift > CYCLIC_TOLERANCE {
        return Err(GeometryError::NotCyclicParallel(drift));
    }
    let k_max = (k + 4).max(8);
    let (a, b) = sphere_series(model, u, k_max, grid)?;
    let kf = k as f64;
    Ok(a.coefficient(k + 2) * (kf + 3.0) * (kf + 4.0) - (c * a.coefficient(k) + b.coefficient(k)))
}

/// `max |τ^S(ru) − τ^S(−ru)|` over the given unit directions (orthonormal
/// coordinates at `p`).
pub fn tau_sphere_evenness_defect(model: &MetricModel, p: &ChartPoint, r: f64, dirs: &[[f64; 3]]) -> Result<f64> {
    let basis = model.orthonormal_basis(p)?;
    let g = model.metric_at(p)?;
    let ode = OdeSettings::default();
    let values: Vec<f64> = dirs
        .par_iter()
        .map(|d| {
            let u = basis[0] * d[0] + basis[1] * d[1] + basis[2] * d[2];
            let mut out = [0.0; 2];
            for (i, sign) in [1.0, -1.0].into_iter().enumerate() {
                let jt = jacobi_radii(model, p, &complete_frame(&g, &(u * sign)), &[r], &ode)?.remove(0);
                out[i] = tau_sphere_at(model, &jt)?;
            }
            Ok((out[0] - out[1]).abs())
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
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

    #[test]
    fn tau_sphere_space_forms() {
        let r: f64 = 0.7;
        let cases = [
            (ModelKind::Euclidean, 2.0 / (r * r)),
            (ModelKind::SpaceForm { kappa: 1.0 }, 2.0 / r.sin().powi(2)),
            (ModelKind::SpaceForm { kappa: -1.0 }, 2.0 / r.sinh().powi(2)),
        ];
        for (kind, want) in cases {
            let m = model(kind, 0.9);
            let p = ChartPoint::origin();
            let u = Vec3::new(0.3, -0.4, 0.5);
            let u = u / m.norm(&p, &u).unwrap();
            let v = TangentVector::new(p, u * r);
            let got = tau_sphere(&m, &v).unwrap();
            assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn steiner_round_sphere() {
        let m = model(ModelKind::SpaceForm { kappa: 1.0 }, 1.5);
        let p = ChartPoint::new(0.2, 0.1, -0.3);
        let basis = m.orthonormal_basis(&p).unwrap();
        let u = (basis[0] + basis[2]) / 2f64.sqrt();
        assert!(steiner_residual(&m, &p, &u, 0.5).unwrap().abs() < 1e-6);
    }

    #[test]
    fn euclidean_totals() {
        let m = model(ModelKind::Euclidean, 10.0);
        let p = ChartPoint::new(1.0, 2.0, 3.0);
        let s = SphereSettings {
            polar_nodes: 6,
            azimuth_nodes: 12,
            ..Default::default()
        };
        let t = total_scalar_sphere_with(&m, &p, 0.5, &s).unwrap();
        assert!((t - 8.0 * PI).abs() < 1e-10);
        let v = TangentVector::new(p, Vec3::new(0.0, 0.3, 0.0));
        let h = total_scalar_hemisphere_with(&m, &v, &s).unwrap();
        assert!((h - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn round_sphere_series() {
        let m = model(ModelKind::SpaceForm { kappa: 1.0 }, 1.5);
        let p = ChartPoint::origin();
        let u = TangentVector::new(p, Vec3::new(0.5, 0.0, 0.0));
        let grid = SeriesGrid::for_working_radius(0.9);
        let (a, b) = sphere_series(&m, &u, 10, &grid).unwrap();
        assert!((a.coefficient(0) - 1.0).abs() < 1e-9);
        assert!((a.coefficient(2) + 1.0 / 3.0).abs() < 1e-7);
        assert!(a.coefficient(3).abs() < 1e-7);
        assert!((b.coefficient(-2) - 2.0).abs() < 1e-9);
        assert!(b.coefficient(0).abs() < 1e-7);
        let pred = series_prediction(&m, &u).unwrap();
        assert!((pred.a2 + 1.0 / 3.0).abs() < 1e-12);
        assert!(recursion_residual(&m, &u, 0, &grid).unwrap().abs() < 1e-6);
    }
}
