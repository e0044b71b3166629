//! Metric models and their curvature hierarchy.
//!
//! Conventions used throughout the crate:
//!
//! * `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`.
//! * `R_{ijkl} = ⟨R(∂_i,∂_j)∂_k, ∂_l⟩`, so the sectional curvature of the
//!   plane spanned by `X, Y` is `R(X,Y,Y,X) / (|X|²|Y|² − ⟨X,Y⟩²)` and the
//!   round sphere is positively curved.
//! * `ρ(Y,Z) = tr(X ↦ R(X,Y)Z)`, `τ = tr_g ρ`.
//!
//! Christoffel symbols and the Riemann tensor come from a degree-2 jet of the
//! metric; covariant derivatives of the Ricci tensor up to second order come
//! from a degree-4 jet. Both are exact up to rounding.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::jet::{Jet, Jet2, Jet4, Scalar};

pub type Vec3 = Vector3<f64>;
pub type Tensor3 = [[[f64; 3]; 3]; 3];
pub type Tensor4 = [[[[f64; 3]; 3]; 3]; 3];

/// Tolerance on `|u| − 1` for directions that must be unit length.
pub const UNIT_TOLERANCE: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub coords: [f64; 3],
}

impl ChartPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        ChartPoint { coords: [x, y, z] }
    }

    pub fn origin() -> Self {
        ChartPoint { coords: [0.0; 3] }
    }

    pub fn vec(&self) -> Vec3 {
        Vec3::from(self.coords)
    }
}

impl From<Vec3> for ChartPoint {
    fn from(v: Vec3) -> Self {
        ChartPoint {
            coords: [v[0], v[1], v[2]],
        }
    }
}

/// Axis-aligned box in chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl ChartBox {
    pub fn cube(half: f64) -> Self {
        ChartBox {
            lo: [-half; 3],
            hi: [half; 3],
        }
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.lo[i] && p[i] <= self.hi[i])
    }
}

/// The closed-form metrics shipped with the crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    Euclidean,
    /// `4 / (1 + κ|x|²)² δ`: stereographic chart of the sphere (κ > 0) or the
    /// Poincaré ball (κ < 0) of constant curvature κ.
    SpaceForm { kappa: f64 },
    /// `dθ² + sin²θ dφ² + dz²` on `S² × ℝ`.
    ProductS2R,
    /// `dθ² + sin²θ dφ² + λ²(dψ + cos θ dφ)²`, the Hopf fibration over the
    /// unit 2-sphere with fibres rescaled by λ.
    Berger { lambda: f64 },
    /// `dx² + dy² + (dz − x dy)²`.
    Heisenberg,
    /// `e^{2f} δ` with `f = ε x y`.
    PerturbedConformal { eps: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricModel {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub kind: ModelKind,
    pub chart_domain: ChartBox,
}

impl MetricModel {
    pub fn new(
        name: impl Into<String>,
        params: BTreeMap<String, f64>,
        kind: ModelKind,
        chart_domain: ChartBox,
    ) -> Self {
        MetricModel {
            name: name.into(),
            params,
            kind,
            chart_domain,
        }
    }

    /// Metric components at `x`, generic so the same formula yields values
    /// or Taylor jets.
    pub fn components<S: Scalar>(&self, x: &[S; 3]) -> [[S; 3]; 3] {
        let zero = S::cst(0.0);
        let one = S::cst(1.0);
        match self.kind {
            ModelKind::Euclidean => diag(one, one, one, zero),
            ModelKind::SpaceForm { kappa } => {
                let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                let denom = (r2 * kappa + 1.0).square();
                let f = denom.recip() * 4.0;
                diag(f, f, f, zero)
            }
            ModelKind::ProductS2R => {
                let s = x[0].sin();
                diag(one, s * s, one, zero)
            }
            ModelKind::Berger { lambda } => {
                let l2 = lambda * lambda;
                let s = x[0].sin();
                let c = x[0].cos();
                let gpp = s * s + c * c * l2;
                let gps = c * l2;
                [
                    [one, zero, zero],
                    [zero, gpp, gps],
                    [zero, gps, S::cst(l2)],
                ]
            }
            ModelKind::Heisenberg => {
                let a = x[0];
                [
                    [one, zero, zero],
                    [zero, a * a + 1.0, -a],
                    [zero, -a, one],
                ]
            }
            ModelKind::PerturbedConformal { eps } => {
                let f = (x[0] * x[1] * (2.0 * eps)).exp();
                diag(f, f, f, zero)
            }
        }
    }

    pub fn check_point(&self, p: &ChartPoint) -> Result<()> {
        if self.chart_domain.contains(&p.coords) {
            Ok(())
        } else {
            Err(GeometryError::OutsideChart(p.coords))
        }
    }

    pub fn metric_at(&self, p: &ChartPoint) -> Result<Matrix3<f64>> {
        self.check_point(p)?;
        let g = self.components::<f64>(&p.coords);
        let m = Matrix3::from_fn(|i, j| g[i][j]);
        if !m.iter().all(|v| v.is_finite()) || m.cholesky().is_none() {
            return Err(GeometryError::NotPositiveDefinite(p.coords));
        }
        Ok(m)
    }

    pub fn inner(&self, p: &ChartPoint, a: &Vec3, b: &Vec3) -> Result<f64> {
        Ok(a.dot(&(self.metric_at(p)? * b)))
    }

    pub fn norm(&self, p: &ChartPoint, a: &Vec3) -> Result<f64> {
        Ok(self.inner(p, a, a)?.sqrt())
    }

    /// A `g`-orthonormal basis of `T_pM`, Gram–Schmidt of the coordinate
    /// basis.
    pub fn orthonormal_basis(&self, p: &ChartPoint) -> Result<[Vec3; 3]> {
        let g = self.metric_at(p)?;
        Ok(gram_schmidt(&g, [Vec3::x(), Vec3::y(), Vec3::z()]))
    }

    /// Reject directions that are not unit length at `p`.
    pub fn require_unit(&self, p: &ChartPoint, u: &Vec3) -> Result<()> {
        let n = self.norm(p, u)?;
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(GeometryError::NonUnitDirection(n));
        }
        Ok(())
    }

    /// Levi-Civita connection data at `p` (the fast path used by the ODEs).
    pub fn connection(&self, p: &ChartPoint) -> Result<Connection> {
        self.check_point(p)?;
        Ok(self.connection_unchecked(&p.coords))
    }

    pub(crate) fn connection_unchecked(&self, x: &[f64; 3]) -> Connection {
        let jets = self.components::<Jet2>(&Jet2::point(*x));
        let mut g = Matrix3::zeros();
        let mut dg = [[[0.0; 3]; 3]; 3]; // dg[m][i][j]
        let mut ddg = [[[[0.0; 3]; 3]; 3]; 3]; // ddg[m][n][i][j]
        for i in 0..3 {
            for j in 0..3 {
                let jet = &jets[i][j];
                g[(i, j)] = jet.value();
                let grad = jet.gradient();
                let hess = jet.hessian();
                for m in 0..3 {
                    dg[m][i][j] = grad[m];
                    for n in 0..3 {
                        ddg[m][n][i][j] = hess[m][n];
                    }
                }
            }
        }
        let g_inv = g.try_inverse().unwrap_or_else(Matrix3::zeros);

        // Lowered symbols Γ_{l,ij} = ½(∂_i g_{lj} + ∂_j g_{li} − ∂_l g_{ij}) and
        // their derivatives.
        let mut low = [[[0.0; 3]; 3]; 3];
        let mut dlow = [[[[0.0; 3]; 3]; 3]; 3]; // dlow[m][l][i][j]
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    low[l][i][j] = 0.5 * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]);
                    for m in 0..3 {
                        dlow[m][l][i][j] =
                            0.5 * (ddg[m][i][l][j] + ddg[m][j][l][i] - ddg[m][l][i][j]);
                    }
                }
            }
        }
        // ∂_m g^{kl} = −g^{ka} ∂_m g_{ab} g^{bl}
        let mut dginv = [Matrix3::zeros(); 3];
        for (m, d) in dginv.iter_mut().enumerate() {
            let dgm = Matrix3::from_fn(|a, b| dg[m][a][b]);
            *d = -(g_inv * dgm * g_inv);
        }
        let mut gamma = [[[0.0; 3]; 3]; 3];
        let mut dgamma = [[[[0.0; 3]; 3]; 3]; 3]; // dgamma[m][k][i][j]
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut s = 0.0;
                    for l in 0..3 {
                        s += g_inv[(k, l)] * low[l][i][j];
                    }
                    gamma[k][i][j] = s;
                    for m in 0..3 {
                        let mut d = 0.0;
                        for l in 0..3 {
                            d += dginv[m][(k, l)] * low[l][i][j] + g_inv[(k, l)] * dlow[m][l][i][j];
                        }
                        dgamma[m][k][i][j] = d;
                    }
                }
            }
        }
        Connection {
            g,
            g_inv,
            gamma,
            dgamma,
        }
    }
}

fn diag<S: Scalar>(a: S, b: S, c: S, zero: S) -> [[S; 3]; 3] {
    [[a, zero, zero], [zero, b, zero], [zero, zero, c]]
}

/// Gram–Schmidt in the inner product `g`.
pub fn gram_schmidt(g: &Matrix3<f64>, vs: [Vec3; 3]) -> [Vec3; 3] {
    let mut out = [Vec3::zeros(); 3];
    for i in 0..3 {
        let mut v = vs[i];
        for o in out.iter().take(i) {
            v -= o * o.dot(&(g * v));
        }
        out[i] = v / v.dot(&(g * v)).sqrt();
    }
    out
}

/// Christoffel symbols and their first derivatives at a chart point.
#[derive(Clone, Debug)]
pub struct Connection {
    pub g: Matrix3<f64>,
    pub g_inv: Matrix3<f64>,
    /// `gamma[k][i][j] = Γ^k_{ij}`
    pub gamma: Tensor3,
    /// `dgamma[m][k][i][j] = ∂_m Γ^k_{ij}`
    pub dgamma: Tensor4,
}

impl Connection {
    /// `Γ(a, b)^k = Γ^k_{ij} a^i b^j`
    pub fn contract(&self, a: &Vec3, b: &Vec3) -> Vec3 {
        let mut out = Vec3::zeros();
        for k in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += self.gamma[k][i][j] * a[i] * b[j];
                }
            }
            out[k] = s;
        }
        out
    }

    fn dcontract(&self, dir: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
        let mut out = Vec3::zeros();
        for m in 0..3 {
            if dir[m] == 0.0 {
                continue;
            }
            for k in 0..3 {
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        s += self.dgamma[m][k][i][j] * a[i] * b[j];
                    }
                }
                out[k] += dir[m] * s;
            }
        }
        out
    }

    /// `R(x, y) z` in coordinates.
    pub fn curvature_vector(&self, x: &Vec3, y: &Vec3, z: &Vec3) -> Vec3 {
        self.dcontract(x, y, z) - self.dcontract(y, x, z) + self.contract(x, &self.contract(y, z))
            - self.contract(y, &self.contract(x, z))
    }

    pub fn inner(&self, a: &Vec3, b: &Vec3) -> f64 {
        a.dot(&(self.g * b))
    }

    /// `R^l_{kij}` with `R(∂_i, ∂_j)∂_k = R^l_{kij} ∂_l`, stored as `[l][k][i][j]`.
    pub fn riemann_up(&self) -> Tensor4 {
        let mut r = [[[[0.0; 3]; 3]; 3]; 3];
        for l in 0..3 {
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        let mut s = self.dgamma[i][l][j][k] - self.dgamma[j][l][i][k];
                        for m in 0..3 {
                            s += self.gamma[l][i][m] * self.gamma[m][j][k]
                                - self.gamma[l][j][m] * self.gamma[m][i][k];
                        }
                        r[l][k][i][j] = s;
                    }
                }
            }
        }
        r
    }

    /// Fully covariant `R_{ijkl} = ⟨R(∂_i,∂_j)∂_k, ∂_l⟩`.
    pub fn riemann_down(&self) -> Tensor4 {
        let up = self.riemann_up();
        let mut r = [[[[0.0; 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let mut s = 0.0;
                        for m in 0..3 {
                            s += self.g[(l, m)] * up[m][k][i][j];
                        }
                        r[i][j][k][l] = s;
                    }
                }
            }
        }
        r
    }

    /// Ricci tensor and scalar curvature.
    pub fn ricci_and_scalar(&self) -> (Matrix3<f64>, f64) {
        let up = self.riemann_up();
        // ρ_{jk} = Σ_i R^i_{k i j}
        let ric = Matrix3::from_fn(|j, k| (0..3).map(|i| up[i][k][i][j]).sum::<f64>());
        let ric = (ric + ric.transpose()) * 0.5;
        let tau = (self.g_inv.component_mul(&ric)).sum();
        (ric, tau)
    }
}

/// Christoffel symbols, curvature tensors and scalar curvature at a point.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub at: ChartPoint,
    pub metric: Matrix3<f64>,
    pub metric_inv: Matrix3<f64>,
    pub gamma: Tensor3,
    pub riemann: Tensor4,
    pub ricci: Matrix3<f64>,
    pub tau: f64,
}

impl CurvatureBundle {
    /// `R(a, b, c, d)` for coordinate vectors.
    pub fn riemann_form(&self, a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        s += self.riemann[i][j][k][l] * a[i] * b[j] * c[k] * d[l];
                    }
                }
            }
        }
        s
    }

    pub fn ricci_form(&self, a: &Vec3, b: &Vec3) -> f64 {
        a.dot(&(self.ricci * b))
    }

    /// `‖R‖²` with indices raised by the metric.
    pub fn riemann_norm_sq(&self) -> f64 {
        let gi = &self.metric_inv;
        let r = &self.riemann;
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        let v = r[a][b][c][d];
                        if v == 0.0 {
                            continue;
                        }
                        let mut raised = 0.0;
                        for i in 0..3 {
                            for j in 0..3 {
                                for k in 0..3 {
                                    for l in 0..3 {
                                        raised += gi[(a, i)]
                                            * gi[(b, j)]
                                            * gi[(c, k)]
                                            * gi[(d, l)]
                                            * r[i][j][k][l];
                                    }
                                }
                            }
                        }
                        s += v * raised;
                    }
                }
            }
        }
        s
    }

    pub fn ricci_norm_sq(&self) -> f64 {
        let m = self.metric_inv * self.ricci;
        (m * m).trace()
    }
}

pub fn curvature_at(model: &MetricModel, p: &ChartPoint) -> Result<CurvatureBundle> {
    let metric = model.metric_at(p)?;
    let conn = model.connection_unchecked(&p.coords);
    let (ricci, tau) = conn.ricci_and_scalar();
    Ok(CurvatureBundle {
        at: *p,
        metric,
        metric_inv: conn.g_inv,
        gamma: conn.gamma,
        riemann: conn.riemann_down(),
        ricci,
        tau,
    })
}

/// Sectional curvature of the plane spanned by `a` and `b`.
pub fn sectional(model: &MetricModel, p: &ChartPoint, a: &Vec3, b: &Vec3) -> Result<f64> {
    let cb = curvature_at(model, p)?;
    let g = &cb.metric;
    let aa = a.dot(&(g * a));
    let bb = b.dot(&(g * b));
    let ab = a.dot(&(g * b));
    let area = aa * bb - ab * ab;
    if area <= 1e-14 * aa * bb || !area.is_finite() {
        return Err(GeometryError::DegeneratePlane);
    }
    Ok(cb.riemann_form(a, b, b, a) / area)
}

/// First and second covariant derivatives of the Ricci tensor and of the
/// scalar curvature at a point.
#[derive(Clone, Debug)]
pub struct RicciJet {
    pub at: ChartPoint,
    pub metric: Matrix3<f64>,
    pub metric_inv: Matrix3<f64>,
    pub ricci: Matrix3<f64>,
    pub tau: f64,
    /// `nabla_ricci[m][i][j] = ∇_m ρ_{ij}`
    pub nabla_ricci: Tensor3,
    /// `∇_m τ`
    pub nabla_tau: [f64; 3],
    /// `nabla2_ricci[n][m][i][j] = ∇²_{nm} ρ_{ij}`
    pub nabla2_ricci: Tensor4,
    /// `∇²_{nm} τ`
    pub nabla2_tau: [[f64; 3]; 3],
}

impl RicciJet {
    pub fn nabla_ricci_uuu(&self, u: &Vec3) -> f64 {
        let mut s = 0.0;
        for m in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    s += self.nabla_ricci[m][i][j] * u[m] * u[i] * u[j];
                }
            }
        }
        s
    }

    pub fn nabla_tau_u(&self, u: &Vec3) -> f64 {
        (0..3).map(|m| self.nabla_tau[m] * u[m]).sum()
    }

    /// `∇²_{uu} τ`
    pub fn nabla2_tau_uu(&self, u: &Vec3) -> f64 {
        let mut s = 0.0;
        for n in 0..3 {
            for m in 0..3 {
                s += self.nabla2_tau[n][m] * u[n] * u[m];
            }
        }
        s
    }

    /// `(∇²_{uu} ρ)(u, u)`
    pub fn nabla2_ricci_uu(&self, u: &Vec3) -> f64 {
        let mut s = 0.0;
        for n in 0..3 {
            for m in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        s += self.nabla2_ricci[n][m][i][j] * u[n] * u[m] * u[i] * u[j];
                    }
                }
            }
        }
        s
    }

    /// `(div ρ)_j = g^{mi} ∇_m ρ_{ij}`, as a covector.
    pub fn div_ricci(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (j, o) in out.iter_mut().enumerate() {
            for m in 0..3 {
                for i in 0..3 {
                    *o += self.metric_inv[(m, i)] * self.nabla_ricci[m][i][j];
                }
            }
        }
        out
    }
}

fn christoffel_jets<const N: usize>(
    g: &[[Jet<N>; 3]; 3],
    gi: &[[Jet<N>; 3]; 3],
) -> [[[Jet<N>; 3]; 3]; 3] {
    let zero = Jet::<N>::constant(0.0);
    let dg: [[[Jet<N>; 3]; 3]; 3] =
        std::array::from_fn(|m| std::array::from_fn(|i| std::array::from_fn(|j| g[i][j].diff(m))));
    let mut gamma = [[[zero; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in i..3 {
                let mut s = zero;
                for l in 0..3 {
                    let low = (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]) * 0.5;
                    s += gi[k][l] * low;
                }
                gamma[k][i][j] = s;
                gamma[k][j][i] = s;
            }
        }
    }
    gamma
}

/// Covariant derivatives of ρ and τ through second order.
pub fn ricci_jet(model: &MetricModel, p: &ChartPoint) -> Result<RicciJet> {
    let metric = model.metric_at(p)?;
    let g = model.components::<Jet4>(&Jet4::point(p.coords));
    let zero = Jet4::constant(0.0);
    let ginv_jets = inverse_jets(&g);
    let gamma = christoffel_jets(&g, &ginv_jets);

    // ρ_{jk} = Σ_i ∂_iΓ^i_{jk} − ∂_jΓ^i_{ik} + Γ^i_{im}Γ^m_{jk} − Γ^i_{jm}Γ^m_{ik}
    let mut trace_gamma = [zero; 3]; // Γ^i_{im}
    for (m, t) in trace_gamma.iter_mut().enumerate() {
        for i in 0..3 {
            *t += gamma[i][i][m];
        }
    }
    let mut ric = [[zero; 3]; 3];
    for j in 0..3 {
        for k in j..3 {
            let mut s = trace_gamma[k].diff(j) * -1.0;
            for i in 0..3 {
                s += gamma[i][j][k].diff(i);
            }
            for m in 0..3 {
                s += trace_gamma[m] * gamma[m][j][k];
                for i in 0..3 {
                    s -= gamma[i][j][m] * gamma[m][i][k];
                }
            }
            ric[j][k] = s;
            ric[k][j] = s;
        }
    }
    let gi = metric.try_inverse().ok_or(GeometryError::NotPositiveDefinite(p.coords))?;
    let mut tau = zero;
    for i in 0..3 {
        for k in 0..3 {
            tau += ginv_jets[i][k] * ric[i][k];
        }
    }

    let mut nabla_ric = [[[zero; 3]; 3]; 3];
    for m in 0..3 {
        for i in 0..3 {
            for j in i..3 {
                let mut s = ric[i][j].diff(m);
                for l in 0..3 {
                    s -= gamma[l][m][i] * ric[l][j] + gamma[l][m][j] * ric[i][l];
                }
                nabla_ric[m][i][j] = s;
                nabla_ric[m][j][i] = s;
            }
        }
    }

    let val3 = |t: &[[[Jet4; 3]; 3]; 3]| -> Tensor3 {
        std::array::from_fn(|a| std::array::from_fn(|b| std::array::from_fn(|c| t[a][b][c].value())))
    };
    let gamma_v = val3(&gamma);
    let nabla_ricci = val3(&nabla_ric);

    let mut nabla2_ricci = [[[[0.0; 3]; 3]; 3]; 3];
    for n in 0..3 {
        for m in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut s = nabla_ric[m][i][j].gradient()[n];
                    for l in 0..3 {
                        s -= gamma_v[l][n][m] * nabla_ricci[l][i][j]
                            + gamma_v[l][n][i] * nabla_ricci[m][l][j]
                            + gamma_v[l][n][j] * nabla_ricci[m][i][l];
                    }
                    nabla2_ricci[n][m][i][j] = s;
                }
            }
        }
    }
    let nabla_tau = tau.gradient();
    let hess = tau.hessian();
    let mut nabla2_tau = [[0.0; 3]; 3];
    for n in 0..3 {
        for m in 0..3 {
            let mut s = hess[n][m];
            for l in 0..3 {
                s -= gamma_v[l][n][m] * nabla_tau[l];
            }
            nabla2_tau[n][m] = s;
        }
    }

    Ok(RicciJet {
        at: *p,
        metric,
        metric_inv: gi,
        ricci: Matrix3::from_fn(|i, j| ric[i][j].value()),
        tau: tau.value(),
        nabla_ricci,
        nabla_tau,
        nabla2_ricci,
        nabla2_tau,
    })
}

fn inverse_jets<const N: usize>(g: &[[Jet<N>; 3]; 3]) -> [[Jet<N>; 3]; 3] {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| g[r0][c0] * g[r1][c1] - g[r0][c1] * g[r1][c0];
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    let det = g[0][0] * adj[0][0] + g[0][1] * adj[1][0] + g[0][2] * adj[2][0];
    let inv = det.recip();
    std::array::from_fn(|i| std::array::from_fn(|j| adj[i][j] * inv))
}

/// `∇_u ρ(u, u)` for a unit direction `u`.
pub fn nabla_ricci_uuu(model: &MetricModel, p: &ChartPoint, u: &Vec3) -> Result<f64> {
    model.require_unit(p, u)?;
    Ok(ricci_jet(model, p)?.nabla_ricci_uuu(u))
}

/// `∇_u ρ(u,u) + c ∇_u τ`; identically zero in `u` only for spaces with
/// cyclic parallel Ricci tensor and constant scalar curvature.
pub fn cyclic_ricci_residual(model: &MetricModel, p: &ChartPoint, u: &Vec3, c: f64) -> Result<f64> {
    if (c + 2.0 / 5.0).abs() < 1e-12 {
        return Err(GeometryError::ExcludedConstant);
    }
    model.require_unit(p, u)?;
    let jet = ricci_jet(model, p)?;
    Ok(jet.nabla_ricci_uuu(u) + c * jet.nabla_tau_u(u))
}

/// Step used by finite-difference cross-checks along geodesics.
pub const FD_STEP: f64 = 1e-3;

/// `(∇²_{uu} τ, ∇²_{uu} ρ(u,u))`, the ingredients of the cylinder
/// coefficient `∇²₁₁τ − 2∇²₁₁ρ₁₁`.
pub fn second_radial_derivatives(model: &MetricModel, p: &ChartPoint, u: &Vec3) -> Result<(f64, f64)> {
    model.require_unit(p, u)?;
    for sign in [1.0, -1.0] {
        crate::geodesic::exp_map(model, p, &(u * (2.0 * FD_STEP * sign)))?;
    }
    let jet = ricci_jet(model, p)?;
    Ok((jet.nabla2_tau_uu(u), jet.nabla2_ricci_uu(u)))
}
