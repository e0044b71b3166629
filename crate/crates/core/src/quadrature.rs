//! Product quadrature on the unit sphere, hemispheres and tube parameter
//! rectangles, plus compensated summation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metric::Vec3;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|xi| mid + half * xi).collect(),
        w.iter().map(|wi| half * wi).collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RuleKind {
    FullSphere,
    /// Upper hemisphere about the pole of the frame the rule is mapped with.
    Hemisphere,
    TubeRectangle,
}

/// Nodes on the unit sphere of `ℝ³` (or `(t, φ)` pairs for tube rectangles)
/// with positive weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Total degree of spherical polynomials integrated exactly.
    pub exactness_degree: usize,
}

impl QuadratureRule {
    /// Gauss–Legendre in `z = cos(polar)` × trapezoid in azimuth, pole `e₃`.
    pub fn sphere(n_polar: usize, n_azimuth: usize) -> Self {
        Self::cap(n_polar, n_azimuth, -1.0, RuleKind::FullSphere)
    }

    /// Same construction on `z ∈ [0, 1]`.
    pub fn hemisphere(n_polar: usize, n_azimuth: usize) -> Self {
        Self::cap(n_polar, n_azimuth, 0.0, RuleKind::Hemisphere)
    }

    fn cap(n_polar: usize, n_azimuth: usize, z_lo: f64, kind: RuleKind) -> Self {
        let (zs, wz) = gauss_legendre_on(n_polar, z_lo, 1.0);
        let dphi = 2.0 * PI / n_azimuth as f64;
        let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        for (z, w) in zs.iter().zip(&wz) {
            let s = (1.0 - z * z).max(0.0).sqrt();
            for j in 0..n_azimuth {
                let phi = dphi * j as f64;
                nodes.push([s * phi.cos(), s * phi.sin(), *z]);
                weights.push(w * dphi);
            }
        }
        QuadratureRule {
            kind,
            nodes,
            weights,
            exactness_degree: (2 * n_polar - 1).min(n_azimuth - 1),
        }
    }

    /// Nodes expressed in the orthonormal frame `(b₁, b₂, b₃)`; for
    /// hemispheres `b₃` is the axis.
    pub fn directions(&self, frame: &[Vec3; 3]) -> Vec<Vec3> {
        self.nodes
            .iter()
            .map(|n| frame[0] * n[0] + frame[1] * n[1] + frame[2] * n[2])
            .collect()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weighted sum of `values` in node order.
    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut acc = KahanSum::default();
        for (w, v) in self.weights.iter().zip(values) {
            acc.add(w * v);
        }
        acc.total()
    }
}

/// Gauss–Legendre in `t` on `[a, b]` × trapezoid in `φ ∈ [0, 2π)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleRule {
    pub t_nodes: Vec<f64>,
    pub t_weights: Vec<f64>,
    pub phi_nodes: Vec<f64>,
    pub phi_weight: f64,
}

impl RectangleRule {
    pub fn new(n_t: usize, n_phi: usize, a: f64, b: f64) -> Self {
        let (t_nodes, t_weights) = gauss_legendre_on(n_t, a, b);
        let phi_weight = 2.0 * PI / n_phi as f64;
        RectangleRule {
            t_nodes,
            t_weights,
            phi_nodes: (0..n_phi).map(|j| phi_weight * j as f64).collect(),
            phi_weight,
        }
    }

    /// Trapezoid (spectrally exact) in `t` for a closed curve of period
    /// `b − a`.
    pub fn periodic(n_t: usize, n_phi: usize, a: f64, b: f64) -> Self {
        let h = (b - a) / n_t as f64;
        let phi_weight = 2.0 * PI / n_phi as f64;
        RectangleRule {
            t_nodes: (0..n_t).map(|i| a + h * i as f64).collect(),
            t_weights: vec![h; n_t],
            phi_nodes: (0..n_phi).map(|j| phi_weight * j as f64).collect(),
            phi_weight,
        }
    }

    pub fn as_rule(&self) -> QuadratureRule {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (t, wt) in self.t_nodes.iter().zip(&self.t_weights) {
            for phi in &self.phi_nodes {
                nodes.push([*t, *phi, 0.0]);
                weights.push(wt * self.phi_weight);
            }
        }
        QuadratureRule {
            kind: RuleKind::TubeRectangle,
            nodes,
            weights,
            exactness_degree: (2 * self.t_nodes.len() - 1).min(self.phi_nodes.len() - 1),
        }
    }
}

/// `count` unit vectors of `ℝ³` from the 2-dimensional Halton sequence
/// (bases 2 and 3), mapped area-preservingly to the sphere and rotated by a
/// Cranley–Patterson shift drawn from `seed`.
pub fn halton_directions(count: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 2] = [rng.gen(), rng.gen()];
    (1..=count)
        .map(|i| {
            let a = (radical_inverse(i, 2) + shift[0]).fract();
            let b = (radical_inverse(i, 3) + shift[1]).fract();
            let z = 1.0 - 2.0 * a;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let phi = 2.0 * PI * b;
            [s * phi.cos(), s * phi.sin(), z]
        })
        .collect()
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Kahan–Babuška compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
