//! Explicit Runge–Kutta 8(5,3) (DOP853) with step-size control and 7th-order dense output.
//!
//! The driver integrates forward in time and hands every accepted step, with its
//! interpolant, to an observer that may stop the integration.

mod tableau;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use tableau::{A, B, C, D as DENSE, E3, E5, STAGES};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_max: f64::INFINITY, h_init: None, max_steps: 2_000_000 }
    }
}

/// Interpolant over one accepted step `[t_old, t_old + h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<const N: usize> {
    pub t_old: f64,
    pub h: f64,
    pub y_old: [f64; N],
    coef: [[f64; N]; 7],
}

impl<const N: usize> Dense<N> {
    pub fn t_new(&self) -> f64 {
        self.t_old + self.h
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_old && t <= self.t_new()
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let x = (t - self.t_old) / self.h;
        let mut y = [0.0; N];
        for (i, f) in self.coef.iter().rev().enumerate() {
            let m = if i % 2 == 0 { x } else { 1.0 - x };
            for k in 0..N {
                y[k] = (y[k] + f[k]) * m;
            }
        }
        for (yk, y0) in y.iter_mut().zip(&self.y_old) {
            *yk += y0;
        }
        y
    }

    /// Finds `t` in the step where `g(eval(t))` changes sign, by bisection on the interpolant.
    /// Returns the end of the final bracket on the side of the new state.
    pub fn locate<G: Fn(&[f64; N]) -> f64>(&self, g: G, mut lo: f64, mut hi: f64, abs_tol: f64) -> f64 {
        let s_lo = g(&self.eval(lo)).signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = g(&self.eval(mid));
            if v.abs() < abs_tol {
                return mid;
            }
            if v.signum() == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Observer verdict after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub stopped: bool,
}

fn rms<const N: usize>(v: &[f64; N], scale: &[f64; N]) -> f64 {
    let s: f64 = v.iter().zip(scale).map(|(a, b)| (a / b) * (a / b)).sum();
    (s / N as f64).sqrt()
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, k: &[[f64; N]], coef: &[f64]) -> [f64; N] {
    let mut out = *y;
    for (kj, cj) in k.iter().zip(coef) {
        if *cj != 0.0 {
            for i in 0..N {
                out[i] += h * cj * kj[i];
            }
        }
    }
    out
}

fn initial_step<const N: usize, F>(rhs: &mut F, t0: f64, t1: f64, y0: &[f64; N], f0: &[f64; N], opts: &Options) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let scale: [f64; N] = std::array::from_fn(|i| opts.atol + y0[i].abs() * opts.rtol);
    let d0 = rms(y0, &scale);
    let d1 = rms(f0, &scale);
    let h_cap = opts.h_max.min(t1 - t0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(h_cap);
    let y1: [f64; N] = std::array::from_fn(|i| y0[i] + h0 * f0[i]);
    let f1 = rhs(t0 + h0, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = rms(&diff, &scale) / h0;
    if !d2.is_finite() {
        return 1e-3 * h0;
    }
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(1.0 / 8.0) };
    (100.0 * h0).min(h1)
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1 > t0`.
pub fn integrate<const N: usize, F, O>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &Options,
    mut observe: O,
) -> Result<Summary<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(&Dense<N>, &[f64; N]) -> Flow,
{
    if !(t1 > t0) {
        return Err(Error::domain(format!("integration interval [{t0}, {t1}] is empty")));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepFailure { t: t0, reason: "non-finite initial state".into() });
    }
    let mut t = t0;
    let mut y = y0;
    let mut f = rhs(t, &y);
    let mut evaluations = 1;
    let mut h = match opts.h_init {
        Some(h) => h,
        None => {
            evaluations += 1;
            initial_step(&mut rhs, t0, t1, &y0, &f, opts)
        }
    };
    h = h.min(opts.h_max).min(t1 - t0);
    let (mut steps, mut rejected) = (0usize, 0usize);
    let mut k = [[0.0; N]; 16];

    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::Budget(format!("step budget {} exhausted at t = {t}", opts.max_steps)));
        }
        let min_step = 10.0 * f64::EPSILON * t.abs().max(1.0);
        let mut step_rejected = false;
        let (t_new, y_new, f_new, h_used) = loop {
            if h < min_step {
                return Err(Error::StepFailure { t, reason: format!("step size {h:.3e} underflow") });
            }
            let mut t_new = t + h;
            if t_new >= t1 || t1 - t_new < min_step {
                t_new = t1;
            }
            let hs = t_new - t;
            k[0] = f;
            for s in 1..STAGES {
                let ys = axpy(&y, hs, &k[..s], &A[s][..s]);
                k[s] = rhs(t + C[s] * hs, &ys);
            }
            let y_new = axpy(&y, hs, &k[..STAGES], &B);
            let f_new = rhs(t_new, &y_new);
            k[STAGES] = f_new;
            evaluations += STAGES;

            let mut e5 = 0.0;
            let mut e3 = 0.0;
            for i in 0..N {
                let sc = opts.atol + y[i].abs().max(y_new[i].abs()) * opts.rtol;
                let (mut a5, mut a3) = (0.0, 0.0);
                for j in 0..=STAGES {
                    a5 += E5[j] * k[j][i];
                    a3 += E3[j] * k[j][i];
                }
                e5 += (a5 / sc) * (a5 / sc);
                e3 += (a3 / sc) * (a3 / sc);
            }
            let err = if e5 == 0.0 && e3 == 0.0 { 0.0 } else { hs * e5 / ((e5 + 0.01 * e3) * N as f64).sqrt() };
            if err.is_finite() && err < 1.0 && y_new.iter().all(|v| v.is_finite()) {
                let mut factor =
                    if err == 0.0 { MAX_FACTOR } else { (SAFETY * err.powf(ERROR_EXPONENT)).min(MAX_FACTOR) };
                if step_rejected {
                    factor = factor.min(1.0);
                }
                h = (hs * factor).min(opts.h_max);
                break (t_new, y_new, f_new, hs);
            }
            let factor = if err.is_finite() { (SAFETY * err.powf(ERROR_EXPONENT)).max(MIN_FACTOR) } else { MIN_FACTOR };
            h = hs * factor;
            step_rejected = true;
            rejected += 1;
        };

        for s in STAGES + 1..16 {
            let ys = axpy(&y, h_used, &k[..s], &A[s][..s]);
            k[s] = rhs(t + C[s] * h_used, &ys);
        }
        evaluations += 3;
        let mut coef = [[0.0; N]; 7];
        for i in 0..N {
            let dy = y_new[i] - y[i];
            coef[0][i] = dy;
            coef[1][i] = h_used * f[i] - dy;
            coef[2][i] = 2.0 * dy - h_used * (f_new[i] + f[i]);
            for (row, drow) in DENSE.iter().enumerate() {
                let mut acc = 0.0;
                for (j, d) in drow.iter().enumerate() {
                    acc += d * k[j][i];
                }
                coef[3 + row][i] = h_used * acc;
            }
        }
        let dense = Dense { t_old: t, h: h_used, y_old: y, coef };
        steps += 1;
        t = t_new;
        y = y_new;
        f = f_new;
        if observe(&dense, &y) == Flow::Stop {
            return Ok(Summary { t, y, steps, rejected, evaluations, stopped: true });
        }
    }
    Ok(Summary { t, y, steps, rejected, evaluations, stopped: false })
}
