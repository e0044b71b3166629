//! Least-squares fits of power and Laurent series in the radius.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};

/// Largest admissible ratio between extreme singular values of the scaled
/// design matrix.
const MAX_CONDITION: f64 = 1e12;

/// Fitted coefficients `c_k` for `k_min ≤ k ≤ k_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub k_min: i32,
    pub k_max: i32,
    pub coefficients: Vec<f64>,
    /// One standard deviation from the fit residuals.
    pub uncertainties: Vec<f64>,
    /// Maximum absolute residual over the grid.
    pub residual: f64,
    pub threshold: f64,
    pub radii: Vec<f64>,
}

impl SeriesFit {
    /// `c_k`, zero outside the fitted range.
    pub fn coefficient(&self, k: i32) -> f64 {
        if k < self.k_min || k > self.k_max {
            return 0.0;
        }
        self.coefficients[(k - self.k_min) as usize]
    }

    pub fn uncertainty(&self, k: i32) -> f64 {
        if k < self.k_min || k > self.k_max {
            return 0.0;
        }
        self.uncertainties[(k - self.k_min) as usize]
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.k_min..=self.k_max)
            .map(|k| self.coefficient(k) * r.powi(k))
            .sum()
    }
}

/// `n` radii geometrically spaced in `[lo, hi]`.
pub fn geometric_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let q = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| lo * q.powi(i as i32)).collect()
}

struct Solved {
    coef: Vec<f64>,
    sigma: Vec<f64>,
    residual: f64,
}

/// Least squares for `y ≈ Σ c_p x^p` over the given powers, with columns
/// scaled by `max|x|^p`.
fn solve(xs: &[f64], ys: &[f64], powers: &[i32]) -> Result<Solved> {
    let m = xs.len();
    let p = powers.len();
    if m < p {
        return Err(GeometryError::IllConditionedFit(format!(
            "{m} samples for {p} unknowns"
        )));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(GeometryError::IllConditionedFit("non-finite sample".into()));
    }
    let xmax = xs.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let scale: Vec<f64> = powers.iter().map(|&k| xmax.powi(k)).collect();
    let a = DMatrix::from_fn(m, p, |i, j| xs[i].powi(powers[j]) / scale[j]);
    let b = DVector::from_column_slice(ys);
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 0.0) || smax / smin > MAX_CONDITION {
        return Err(GeometryError::IllConditionedFit(format!(
            "condition number {:e}",
            smax / smin
        )));
    }
    let z = svd
        .solve(&b, 0.0)
        .map_err(|e| GeometryError::IllConditionedFit(e.to_string()))?;
    let res = &a * &z - &b;
    let residual = res.amax();
    let dof = m.saturating_sub(p);
    let var = if dof > 0 { res.norm_squared() / dof as f64 } else { 0.0 };
    let v_t = svd.v_t.as_ref().expect("requested V");
    let sigma = (0..p)
        .map(|j| {
            let d: f64 = (0..p).map(|s| (v_t[(s, j)] / sv[s]).powi(2)).sum();
            (var * d).sqrt() / scale[j]
        })
        .collect();
    let coef = z.iter().zip(&scale).map(|(z, s)| z / s).collect();
    Ok(Solved { coef, sigma, residual })
}

fn check_threshold(residual: f64, threshold: f64) -> Result<()> {
    if residual > threshold {
        Err(GeometryError::FitResidual {
            residual,
            threshold,
        })
    } else {
        Ok(())
    }
}

/// Fits `y ≈ Σ_{k=0}^{degree} c_k x^k`.
pub fn fit_polynomial(xs: &[f64], ys: &[f64], degree: usize, threshold: f64) -> Result<SeriesFit> {
    let powers: Vec<i32> = (0..=degree as i32).collect();
    let s = solve(xs, ys, &powers)?;
    check_threshold(s.residual, threshold)?;
    Ok(SeriesFit {
        k_min: 0,
        k_max: degree as i32,
        coefficients: s.coef,
        uncertainties: s.sigma,
        residual: s.residual,
        threshold,
        radii: xs.to_vec(),
    })
}

/// Fits `y ≈ Σ_{k ∈ powers} c_k x^k`; the result spans
/// `min(powers)..=max(powers)` with absent powers reported as zero.
pub fn fit_powers(xs: &[f64], ys: &[f64], powers: &[i32], threshold: f64) -> Result<SeriesFit> {
    let s = solve(xs, ys, powers)?;
    check_threshold(s.residual, threshold)?;
    let k_min = *powers.iter().min().expect("non-empty powers");
    let k_max = *powers.iter().max().expect("non-empty powers");
    let n = (k_max - k_min + 1) as usize;
    let mut coefficients = vec![0.0; n];
    let mut uncertainties = vec![0.0; n];
    for (i, &k) in powers.iter().enumerate() {
        coefficients[(k - k_min) as usize] = s.coef[i];
        uncertainties[(k - k_min) as usize] = s.sigma[i];
    }
    Ok(SeriesFit {
        k_min,
        k_max,
        coefficients,
        uncertainties,
        residual: s.residual,
        threshold,
        radii: xs.to_vec(),
    })
}

/// Fits the Laurent series `F(s) ≈ Σ_{k=k_min}^{k_max} c_k s^k` from samples
/// `F(r)` (`plus`) and `F(−r)` (`minus`) on positive radii. `s^{−k_min}F` is
/// split into even and odd parts, which are fitted separately.
pub fn fit_signed(
    radii: &[f64],
    plus: &[f64],
    minus: &[f64],
    k_min: i32,
    k_max: i32,
    threshold: f64,
) -> Result<SeriesFit> {
    if k_max < k_min || plus.len() != radii.len() || minus.len() != radii.len() {
        return Err(GeometryError::InvalidArgument("inconsistent series fit input".into()));
    }
    let shift = -k_min;
    let sign = if shift % 2 == 0 { 1.0 } else { -1.0 };
    let mut even = Vec::with_capacity(radii.len());
    let mut odd = Vec::with_capacity(radii.len());
    for ((r, fp), fm) in radii.iter().zip(plus).zip(minus) {
        let gp = r.powi(shift) * fp;
        let gm = sign * r.powi(shift) * fm;
        even.push(0.5 * (gp + gm));
        odd.push(0.5 * (gp - gm));
    }
    let top = k_max - k_min;
    let even_powers: Vec<i32> = (0..=top).filter(|j| j % 2 == 0).collect();
    let odd_powers: Vec<i32> = (0..=top).filter(|j| j % 2 == 1).collect();
    let n = (top + 1) as usize;
    let mut coefficients = vec![0.0; n];
    let mut uncertainties = vec![0.0; n];
    let mut residual = 0.0_f64;
    for (powers, ys) in [(&even_powers, &even), (&odd_powers, &odd)] {
        if powers.is_empty() {
            continue;
        }
        let s = solve(radii, ys, powers)?;
        residual = residual.max(s.residual);
        for (i, &j) in powers.iter().enumerate() {
            coefficients[j as usize] = s.coef[i];
            uncertainties[j as usize] = s.sigma[i];
        }
    }
    check_threshold(residual, threshold)?;
    Ok(SeriesFit {
        k_min,
        k_max,
        coefficients,
        uncertainties,
        residual,
        threshold,
        radii: radii.to_vec(),
    })
}
