//! Dormand–Prince 5(4) with step-size control and the pair's continuous
//! extension for dense output.

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};

/// Step-size control settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeSettings {
    fn default() -> Self {
        OdeSettings {
            rtol: 1e-11,
            atol: 1e-13,
            max_steps: 200_000,
        }
    }
}

/// Right-hand side of `y' = f(t, y)`. An `Err` aborts the integration (for
/// example when the state leaves the chart).
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], dy: &mut [f64; N]) -> Result<()>;
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension (Hairer–Nørsett–Wanner, DOPRI5 dense output)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its interpolation coefficients.
#[derive(Clone, Debug)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.rcont;
        std::array::from_fn(|i| {
            r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])))
        })
    }
}

/// Piecewise dense solution over `[t_start, t_end]` (either direction).
#[derive(Clone, Debug)]
pub struct DenseSolution<const N: usize> {
    pub steps: Vec<DenseStep<N>>,
    pub t_start: f64,
    pub t_end: f64,
}

impl<const N: usize> DenseSolution<N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        let forward = self.t_end >= self.t_start;
        let idx = self
            .steps
            .partition_point(|s| if forward { s.t1() < t } else { s.t1() > t });
        let idx = idx.min(self.steps.len() - 1);
        self.steps[idx].eval(t)
    }
}

fn error_norm<const N: usize>(y: &[f64; N], ynew: &[f64; N], err: &[f64; N], s: &OdeSettings) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = s.atol + s.rtol * y[i].abs().max(ynew[i].abs());
        let e = err[i] / sc;
        acc += e * e;
    }
    (acc / N as f64).sqrt()
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        y[i] + h * s
    })
}

/// Integrates from `t0` through each of `outputs` (monotone in the direction
/// of integration), landing on them exactly, and returns the states there.
///
/// `observer` is called after every accepted step and may abort.
pub fn integrate_through<S, const N: usize>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    outputs: &[f64],
    settings: &OdeSettings,
    mut observer: impl FnMut(f64, &[f64; N]) -> Result<()>,
    mut dense: Option<&mut Vec<DenseStep<N>>>,
) -> Result<Vec<[f64; N]>>
where
    S: OdeSystem<N>,
{
    let mut out = Vec::with_capacity(outputs.len());
    let Some(&last) = outputs.last() else {
        return Ok(out);
    };
    let dir = if last >= t0 { 1.0 } else { -1.0 };
    let span = (last - t0).abs();

    let mut t = t0;
    let mut y = y0;
    let mut k1 = [0.0; N];
    sys.rhs(t, &y, &mut k1)?;

    // initial step guess (Hairer's heuristic, simplified)
    let d0 = error_norm(&y, &y, &y, settings);
    let d1 = error_norm(&y, &y, &k1, settings);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h = h.min(span.max(1e-12)) * dir;

    let mut steps = 0usize;
    let mut next_out = 0usize;
    while next_out < outputs.len() && (outputs[next_out] - t) * dir <= 0.0 {
        out.push(y);
        next_out += 1;
    }
    let mut k2 = [0.0; N];
    let mut k3 = [0.0; N];
    let mut k4 = [0.0; N];
    let mut k5 = [0.0; N];
    let mut k6 = [0.0; N];
    let mut k7 = [0.0; N];
    let mut reject_streak = false;
    while next_out < outputs.len() {
        steps += 1;
        if steps > settings.max_steps {
            return Err(GeometryError::Integration(format!(
                "exceeded {} steps at t = {t}",
                settings.max_steps
            )));
        }
        let target = outputs[next_out];
        let h_free = h;
        let mut hit = false;
        if (t + h - target) * dir >= 0.0 {
            h = target - t;
            hit = true;
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(GeometryError::Integration(format!("step size underflow at t = {t}")));
        }

        let y2 = axpy(&y, h, &[(A21, &k1)]);
        sys.rhs(t + C2 * h, &y2, &mut k2)?;
        let y3 = axpy(&y, h, &[(A31, &k1), (A32, &k2)]);
        sys.rhs(t + C3 * h, &y3, &mut k3)?;
        let y4 = axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        sys.rhs(t + C4 * h, &y4, &mut k4)?;
        let y5 = axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        sys.rhs(t + C5 * h, &y5, &mut k5)?;
        let y6 = axpy(
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        sys.rhs(t + h, &y6, &mut k6)?;
        let ynew = axpy(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        sys.rhs(t + h, &ynew, &mut k7)?;
        let err: [f64; N] = std::array::from_fn(|i| {
            h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let en = error_norm(&y, &ynew, &err, settings);

        if en <= 1.0 {
            if let Some(d) = dense.as_deref_mut() {
                let mut rcont = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rcont[0][i] = y[i];
                    rcont[1][i] = ydiff;
                    rcont[2][i] = bspl;
                    rcont[3][i] = ydiff - h * k7[i] - bspl;
                    rcont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                d.push(DenseStep { t0: t, h, rcont });
            }
            t = if hit { target } else { t + h };
            y = ynew;
            k1 = k7;
            observer(t, &y)?;
            while next_out < outputs.len() && (outputs[next_out] - t) * dir <= 0.0 {
                out.push(y);
                next_out += 1;
            }
            let mut fac = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            if reject_streak {
                fac = fac.min(1.0);
            }
            reject_streak = false;
            // a step shortened to land on an output does not shrink the next one
            h = h_free.abs().max(h.abs()) * fac * dir;
        } else {
            reject_streak = true;
            let fac = (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
        }
    }
    Ok(out)
}

/// Integrates from `t0` to `t1` and returns the final state.
pub fn integrate<S, const N: usize>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    settings: &OdeSettings,
) -> Result<[f64; N]>
where
    S: OdeSystem<N>,
{
    let v = integrate_through(sys, t0, y0, &[t1], settings, |_, _| Ok(()), None)?;
    Ok(v[0])
}

/// Integrates from `t0` to `t1` keeping the dense interpolant.
pub fn integrate_dense<S, const N: usize>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    settings: &OdeSettings,
) -> Result<DenseSolution<N>>
where
    S: OdeSystem<N>,
{
    let mut steps = Vec::new();
    integrate_through(sys, t0, y0, &[t1], settings, |_, _| Ok(()), Some(&mut steps))?;
    Ok(DenseSolution {
        steps,
        t_start: t0,
        t_end: t1,
    })
}
