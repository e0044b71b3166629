//! Truncated multivariate Taylor jets in three variables.
//!
//! A `Jet<N>` holds the Taylor coefficients of a function of the three chart
//! coordinates about a fixed point, truncated at total degree `D` where `N` is
//! the number of monomials of degree `<= D` (1, 4, 10, 20 or 35 for
//! `D = 0..=4`). Arithmetic propagates every partial derivative up to order
//! `D` exactly, which is forward-mode differentiation carried to high order.
//!
//! Coefficients are stored in the monomial basis, so the partial derivative
//! `d^a/dx^a d^b/dy^b d^c/dz^c` at the expansion point is `a! b! c!` times the
//! coefficient of `x^a y^b z^c`.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

pub const MAX_DEGREE: usize = 4;

/// Number of monomials in three variables of total degree `<= degree`.
pub const fn monomial_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) * (degree + 3) / 6
}

struct Tables {
    degree: usize,
    exps: Vec<[usize; 3]>,
    index: [[[usize; MAX_DEGREE + 1]; MAX_DEGREE + 1]; MAX_DEGREE + 1],
    /// (lhs, rhs, out) triples of the truncated product, sorted by `out`.
    mul: Vec<(u16, u16, u16)>,
    /// Per variable: (source, destination, factor).
    deriv: [Vec<(u16, u16, f64)>; 3],
}

impl Tables {
    fn build(degree: usize) -> Self {
        let mut exps = Vec::new();
        for total in 0..=degree {
            for a in (0..=total).rev() {
                for b in (0..=(total - a)).rev() {
                    exps.push([a, b, total - a - b]);
                }
            }
        }
        let mut index = [[[usize::MAX; MAX_DEGREE + 1]; MAX_DEGREE + 1]; MAX_DEGREE + 1];
        for (i, e) in exps.iter().enumerate() {
            index[e[0]][e[1]][e[2]] = i;
        }
        let mut mul = Vec::new();
        for (i, ei) in exps.iter().enumerate() {
            for (j, ej) in exps.iter().enumerate() {
                let s = [ei[0] + ej[0], ei[1] + ej[1], ei[2] + ej[2]];
                if s[0] + s[1] + s[2] <= degree {
                    mul.push((i as u16, j as u16, index[s[0]][s[1]][s[2]] as u16));
                }
            }
        }
        mul.sort_by_key(|&(i, j, k)| (k, i, j));
        let deriv = std::array::from_fn(|var| {
            let mut out = Vec::new();
            for (i, e) in exps.iter().enumerate() {
                if e[var] > 0 {
                    let mut lowered = *e;
                    lowered[var] -= 1;
                    out.push((
                        i as u16,
                        index[lowered[0]][lowered[1]][lowered[2]] as u16,
                        e[var] as f64,
                    ));
                }
            }
            out
        });
        Tables {
            degree,
            exps,
            index,
            mul,
            deriv,
        }
    }
}

fn tables(n: usize) -> &'static Tables {
    static CELLS: [OnceLock<Tables>; MAX_DEGREE + 1] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    let degree = (0..=MAX_DEGREE)
        .find(|&d| monomial_count(d) == n)
        .unwrap_or_else(|| panic!("unsupported jet size {n}"));
    CELLS[degree].get_or_init(|| Tables::build(degree))
}

/// Truncated Taylor polynomial in three variables with `N` coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const N: usize> {
    c: [f64; N],
}

/// Degree-2 jet: values, gradients and Hessians.
pub type Jet2 = Jet<10>;
/// Degree-4 jet: enough for second covariant derivatives of curvature.
pub type Jet4 = Jet<35>;

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Jet { c }
    }

    /// The coordinate function `x_var` expanded about `at`.
    pub fn variable(var: usize, at: f64) -> Self {
        let mut j = Self::constant(at);
        if N > 1 {
            let t = tables(N);
            let mut e = [0usize; 3];
            e[var] = 1;
            j.c[t.index[e[0]][e[1]][e[2]]] = 1.0;
        }
        j
    }

    /// Seed all three chart coordinates at `p`.
    pub fn point(p: [f64; 3]) -> [Self; 3] {
        [
            Self::variable(0, p[0]),
            Self::variable(1, p[1]),
            Self::variable(2, p[2]),
        ]
    }

    pub fn degree() -> usize {
        tables(N).degree
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64; N] {
        &self.c
    }

    /// Taylor coefficient of `x^a y^b z^c`.
    pub fn coefficient(&self, exps: [usize; 3]) -> f64 {
        if exps.iter().sum::<usize>() > Self::degree() {
            return 0.0;
        }
        self.c[tables(N).index[exps[0]][exps[1]][exps[2]]]
    }

    /// Partial derivative `d^a/dx^a d^b/dy^b d^c/dz^c` at the expansion point.
    pub fn partial(&self, exps: [usize; 3]) -> f64 {
        let fact = |k: usize| (1..=k).product::<usize>() as f64;
        self.coefficient(exps) * fact(exps[0]) * fact(exps[1]) * fact(exps[2])
    }

    /// Gradient at the expansion point.
    pub fn gradient(&self) -> [f64; 3] {
        [
            self.partial([1, 0, 0]),
            self.partial([0, 1, 0]),
            self.partial([0, 0, 1]),
        ]
    }

    /// Hessian at the expansion point.
    pub fn hessian(&self) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for (i, row) in h.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let mut e = [0usize; 3];
                e[i] += 1;
                e[j] += 1;
                *v = self.partial(e);
            }
        }
        h
    }

    /// Partial derivative with respect to `var`. The result is exact up to
    /// degree `D - 1`; its top-degree coefficients are zero.
    pub fn diff(&self, var: usize) -> Self {
        let mut out = [0.0; N];
        for &(src, dst, f) in &tables(N).deriv[var] {
            out[dst as usize] += f * self.c[src as usize];
        }
        Jet { c: out }
    }

    /// Compose with a scalar function given its derivatives `g^(k)(f0)`
    /// for `k = 0..=D`.
    fn compose(&self, derivs: &[f64]) -> Self {
        let degree = Self::degree();
        let mut h = *self;
        h.c[0] = 0.0;
        let mut out = Self::constant(derivs[0]);
        let mut power = Self::constant(1.0);
        let mut fact = 1.0;
        for (k, d) in derivs.iter().enumerate().take(degree + 1).skip(1) {
            power = power * h;
            fact *= k as f64;
            out += power * (d / fact);
        }
        out
    }

    pub fn exps_table() -> &'static [[usize; 3]] {
        &tables(N).exps
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = [0.0; N];
        for &(i, j, k) in &tables(N).mul {
            out[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        Jet { c: out }
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for a in self.c.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        for a in self.c.iter_mut() {
            *a *= rhs;
        }
        self
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.c[0] += rhs;
        self
    }
}

impl<const N: usize> AddAssign for Jet<N> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const N: usize> SubAssign for Jet<N> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const N: usize> MulAssign for Jet<N> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

/// Arithmetic shared by `f64` and the jet types, so metric formulas are
/// written once and evaluated either as plain values or with derivatives.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + Add<f64, Output = Self>
    + AddAssign
    + SubAssign
{
    fn cst(v: f64) -> Self;
    fn val(&self) -> f64;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn recip(self) -> Self;
    fn sqrt(self) -> Self;

    fn square(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn val(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

impl<const N: usize> Scalar for Jet<N> {
    fn cst(v: f64) -> Self {
        Jet::constant(v)
    }
    fn val(&self) -> f64 {
        self.c[0]
    }
    fn exp(self) -> Self {
        let e = self.c[0].exp();
        self.compose(&[e; MAX_DEGREE + 1])
    }
    fn sin(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose(&[s, c, -s, -c, s])
    }
    fn cos(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose(&[c, -s, -c, s, c])
    }
    fn recip(self) -> Self {
        let x = self.c[0];
        let mut d = [0.0; MAX_DEGREE + 1];
        // d^k/dx^k x^-1 = (-1)^k k! x^-(k+1)
        let mut acc = 1.0 / x;
        for (k, slot) in d.iter_mut().enumerate() {
            *slot = acc;
            acc *= -((k + 1) as f64) / x;
        }
        self.compose(&d)
    }
    fn sqrt(self) -> Self {
        let x = self.c[0];
        let mut d = [0.0; MAX_DEGREE + 1];
        // d^k/dx^k x^(1/2) = (1/2)(1/2 - 1)...(1/2 - k + 1) x^(1/2 - k)
        let mut coeff = 1.0;
        for (k, slot) in d.iter_mut().enumerate() {
            *slot = coeff * x.powf(0.5 - k as f64);
            coeff *= 0.5 - k as f64;
        }
        self.compose(&d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(monomial_count(0), 1);
        assert_eq!(monomial_count(2), 10);
        assert_eq!(monomial_count(4), 35);
        assert_eq!(Jet4::exps_table().len(), 35);
    }

    #[test]
    fn polynomial_partials_are_exact() {
        // f = x^2 y + 3 y z^3 at (1, 2, -1)
        let [x, y, z] = Jet4::point([1.0, 2.0, -1.0]);
        let f = x * x * y + y * z * z * z * 3.0;
        assert_eq!(f.value(), 2.0 - 6.0);
        assert_eq!(f.partial([1, 0, 0]), 4.0);
        assert_eq!(f.partial([0, 1, 0]), 1.0 - 3.0);
        assert_eq!(f.partial([0, 0, 1]), 18.0);
        assert_eq!(f.partial([2, 1, 0]), 2.0);
        assert_eq!(f.partial([0, 1, 3]), 18.0);
        assert_eq!(f.partial([0, 0, 3]), 36.0);
        assert_eq!(f.partial([0, 0, 4]), 0.0);
    }

    #[test]
    fn transcendental_derivatives() {
        let [x, y, _] = Jet4::point([0.3, -0.7, 0.0]);
        let f = (x * y).exp();
        let e = (0.3f64 * -0.7).exp();
        assert!((f.partial([1, 0, 0]) - (-0.7) * e).abs() < 1e-14);
        // d^4/dx^4 exp(xy) = y^4 exp(xy)
        assert!((f.partial([4, 0, 0]) - 0.7f64.powi(4) * e).abs() < 1e-13);
        // d^2/dxdy exp(xy) = (1 + xy) exp(xy)
        assert!((f.partial([1, 1, 0]) - (1.0 - 0.21) * e).abs() < 1e-14);

        let s = x.sin();
        assert!((s.partial([3, 0, 0]) + 0.3f64.cos()).abs() < 1e-14);
        let c = x.cos();
        assert!((c.partial([4, 0, 0]) - 0.3f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn recip_and_sqrt_invert_products() {
        let [x, y, z] = Jet4::point([0.4, 1.3, 2.0]);
        let f = x * y + z * z + 1.0;
        let one = f * f.recip();
        assert!((one.value() - 1.0).abs() < 1e-15);
        for c in &one.coefficients()[1..] {
            assert!(c.abs() < 1e-13);
        }
        let r = f.sqrt();
        let back = r * r - f;
        for c in back.coefficients() {
            assert!(c.abs() < 1e-13);
        }
    }

    #[test]
    fn diff_lowers_degree() {
        let [x, y, _] = Jet2::point([2.0, 3.0, 0.0]);
        let f = x * x * y;
        let fx = f.diff(0);
        assert_eq!(fx.value(), 12.0);
        assert_eq!(fx.partial([1, 0, 0]), 6.0);
        assert_eq!(fx.partial([0, 1, 0]), 4.0);
    }
}
