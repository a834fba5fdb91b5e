//! Exterior problem on `[R₁, ∞)`.
//!
//! A fast-decay solution with `r^{N−2} v(r) → η` solves
//! `φ(r) = η − (1/(N−2)) ∫_r^∞ G(t) (1 − (r/t)^{N−2}) dt`, where `φ = r^{N−2} v` and
//! `G(t) = t^{N−1} (K(t) v₊^p + μ f(t))`. In `y = R₁/t ∈ (0, 1]` the range is finite; it is
//! covered by geometric panels `[2^{-k-1}, 2^{-k}]` (plus `[0, 2^{-40}]`) with 16
//! Gauss–Legendre nodes each, and the equation is solved by Picard iteration.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{far_field_coeffs, CoefficientProfile, ForcingProfile, ProblemSpec};
use crate::quadrature::{barycentric_eval, barycentric_weights, gauss_legendre, integrate_tail, QuadOptions};
use crate::shooting::{regular_solve, RadialSolution, SolverOptions, Termination, Zeta};

const NODES: usize = 16;
const LEVELS: usize = 40;
/// Largest accepted Picard contraction factor.
pub const CONTRACTION_LIMIT: f64 = 1.0 / 3.0;
/// Default starting radius for the exterior problem.
pub const DEFAULT_R1: f64 = 10.0;

struct PanelGrid {
    /// `(lo, hi)` in `y`, ascending from `y = 0`.
    panels: Vec<(f64, f64)>,
    x: Vec<f64>,
    w: Vec<f64>,
    bary: Vec<f64>,
    /// `S[i][j] = ∫_{-1}^{x_i} ℓ_j`.
    s: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn grid() -> &'static PanelGrid {
    static GRID: OnceLock<PanelGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        let (x, w) = gauss_legendre(NODES);
        let bary = barycentric_weights(&x);
        let lagrange = |j: usize, z: f64| {
            let mut e = vec![0.0; NODES];
            e[j] = 1.0;
            barycentric_eval(&x, &bary, &e, z)
        };
        let s = x
            .iter()
            .map(|&xi| {
                let half = 0.5 * (xi + 1.0);
                (0..NODES)
                    .map(|j| x.iter().zip(&w).map(|(xk, wk)| wk * half * lagrange(j, -1.0 + half * (xk + 1.0))).sum())
                    .collect()
            })
            .collect();
        let mut panels = vec![(0.0, 0.5f64.powi(LEVELS as i32))];
        panels.extend((0..LEVELS).rev().map(|k| (0.5f64.powi(k as i32 + 1), 0.5f64.powi(k as i32))));
        let y = panels
            .iter()
            .flat_map(|&(lo, hi)| x.iter().map(move |xi| 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi))
            .collect();
        PanelGrid { panels, x, w, bary, s, y }
    })
}

impl PanelGrid {
    /// `∫_0^{y_i} h(y) dy` at every node.
    fn cumulative(&self, h: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(h.len());
        let mut before = 0.0;
        for (k, &(lo, hi)) in self.panels.iter().enumerate() {
            let half = 0.5 * (hi - lo);
            let hk = &h[k * NODES..(k + 1) * NODES];
            for row in &self.s {
                out.push(before + half * row.iter().zip(hk).map(|(a, b)| a * b).sum::<f64>());
            }
            before += half * self.w.iter().zip(hk).map(|(a, b)| a * b).sum::<f64>();
        }
        out
    }

    fn locate(&self, y: f64) -> usize {
        if y <= self.panels[0].1 {
            return 0;
        }
        let k = (-y.log2()).floor().clamp(0.0, (LEVELS - 1) as f64) as usize;
        self.panels.len() - 1 - k
    }

    fn interpolate(&self, values: &[f64], y: f64) -> f64 {
        let k = self.locate(y);
        let (lo, hi) = self.panels[k];
        let z = (2.0 * y - lo - hi) / (hi - lo);
        barycentric_eval(&self.x, &self.bary, &values[k * NODES..(k + 1) * NODES], z)
    }
}

/// Fast-decay exterior solution `v_{η,μ}` on `[R₁, ∞)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FarFieldSolution {
    pub eta: f64,
    pub mu: f64,
    pub r1: f64,
    /// Sup-norm changes of `φ` between Picard iterates.
    pub residuals: Vec<f64>,
    /// Largest measured ratio of consecutive residuals.
    pub contraction: f64,
    /// Decay exponent of the tail: `v ~ η r^{-(N−2)}`.
    pub tail_exponent: f64,
    /// `φ = r^{N−2} v` at the nodes `y = R₁/r`.
    phi: Vec<f64>,
    /// `∫_r^∞ G` at the nodes.
    flux: Vec<f64>,
}

impl FarFieldSolution {
    fn n2(&self) -> f64 {
        self.tail_exponent
    }

    /// `(v(r), v'(r))` for `r ≥ R₁`.
    pub fn eval(&self, r: f64) -> Option<(f64, f64)> {
        if !(r >= self.r1 * (1.0 - 1e-12)) {
            return None;
        }
        let g = grid();
        let y = (self.r1 / r).min(1.0);
        let phi = g.interpolate(&self.phi, y);
        let flux = g.interpolate(&self.flux, y);
        let n2 = self.n2();
        Some((phi * r.powf(-n2), r.powf(-n2 - 1.0) * (flux - n2 * self.eta)))
    }

    /// `r^{N−2} v(r)`.
    pub fn phi(&self, r: f64) -> Option<f64> {
        self.eval(r).map(|(v, _)| v * r.powf(self.n2()))
    }

    /// Node samples `(r, v, v')`, ascending in `r`.
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        let g = grid();
        let n2 = self.n2();
        g.y.iter()
            .zip(&self.phi)
            .zip(&self.flux)
            .rev()
            .map(|((&y, &phi), &flux)| {
                let r = self.r1 / y;
                (r, phi * r.powf(-n2), r.powf(-n2 - 1.0) * (flux - n2 * self.eta))
            })
            .collect()
    }

    /// `true` when `r^{N−2} v` stays in `[η/8, 8η]`.
    pub fn in_window(&self) -> bool {
        self.phi.iter().all(|&p| p >= self.eta / 8.0 && p <= 8.0 * self.eta)
    }

    /// Trajectory on `[R₁, r_max]` with 64 log-spaced samples per decade.
    pub fn to_radial(&self, spec: &ProblemSpec, r_max: f64) -> Result<RadialSolution> {
        if !(r_max > self.r1) {
            return Err(Error::domain("r_max must exceed R1"));
        }
        let m = ((r_max / self.r1).log10() * 64.0).round().max(2.0) as usize;
        let samples = (0..=m)
            .map(|i| {
                let r = self.r1 * (r_max / self.r1).powf(i as f64 / m as f64);
                let (u, du) = self.eval(r).expect("r >= R1");
                crate::shooting::Sample { r, u, du }
            })
            .collect();
        Ok(RadialSolution::from_samples(spec.with_mu(self.mu), Zeta::Exterior(self.eta), samples))
    }

    /// Weighted residual of the exterior equation on `[R₁, 10³ R₁]`: the larger of
    /// `r^{N−1} |v'_fd − v'| / ((N−2)η)` and `r |(r^{N−1}v')'_fd + G| / ((N−2)η)`.
    pub fn ode_residual(&self, spec: &ProblemSpec) -> f64 {
        let n2 = self.n2();
        let flux = |r: f64| {
            let (_, dv) = self.eval(r).unwrap_or((f64::NAN, f64::NAN));
            r.powf(n2 + 1.0) * dv
        };
        let v = |r: f64| self.eval(r).map_or(f64::NAN, |e| e.0);
        let scale = n2 * self.eta;
        let mut worst: f64 = 0.0;
        for i in 0..=120 {
            let r = self.r1 * 1.05 * 10f64.powf(3.0 * i as f64 / 120.0);
            let h = 1e-3 * r;
            let d1 = (8.0 * (v(r + h) - v(r - h)) - (v(r + 2.0 * h) - v(r - 2.0 * h))) / (12.0 * h);
            let dq = (8.0 * (flux(r + h) - flux(r - h)) - (flux(r + 2.0 * h) - flux(r - 2.0 * h))) / (12.0 * h);
            let (vr, dv) = self.eval(r).expect("r >= R1");
            let g = r.powf(n2 + 1.0) * spec.source(r, vr);
            worst = worst.max(r.powf(n2 + 1.0) * (d1 - dv).abs() / scale).max(r * (dq + g).abs() / scale);
        }
        worst
    }
}

/// Picard iteration at fixed `R₁`. Returns the solution even when the contraction factor
/// exceeds the limit; callers decide.
fn picard_fixed(spec: &ProblemSpec, eta: f64, r1: f64, max_iter: usize) -> Result<FarFieldSolution> {
    if !(eta > 0.0) || !(r1 > 0.0) {
        return Err(Error::domain("eta and R1 must be positive"));
    }
    let g = grid();
    let n2 = spec.nf() - 2.0;
    let p = spec.p;
    let mu = spec.mu;
    // t^{N-1} v^p = φ^p t^{N-1-(N-2)p}; the combined power avoids underflow.
    let expo = n2 + 1.0 - n2 * p;
    let nodes: Vec<(f64, f64, f64, f64)> =
        g.y.iter()
            .map(|&y| {
                let t = r1 / y;
                let forcing = if mu == 0.0 { 0.0 } else { mu * t.powf(n2 + 1.0) * spec.f.eval(t) };
                (y, spec.k.eval(t) * t.powf(expo), forcing, r1 / (y * y))
            })
            .collect();
    let apply = |phi: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let h: Vec<f64> =
            nodes.iter().zip(phi).map(|(&(_, kt, ft, jac), &ph)| (kt * ph.max(0.0).powf(p) + ft) * jac).collect();
        let hy: Vec<f64> = h.iter().zip(&nodes).map(|(hi, n)| hi * n.0.powf(n2)).collect();
        let a = g.cumulative(&h);
        let b = g.cumulative(&hy);
        let next =
            nodes.iter().zip(a.iter().zip(&b)).map(|(n, (ai, bi))| eta - (ai - bi * n.0.powf(-n2)) / n2).collect();
        (next, a)
    };
    let mut phi = vec![eta; g.y.len()];
    let mut flux;
    let mut residuals = Vec::new();
    let mut contraction: f64 = 0.0;
    loop {
        let (next, a) = apply(&phi);
        flux = a;
        let res = next.iter().zip(&phi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if !res.is_finite() {
            return Err(Error::NoContraction { ratio: f64::INFINITY, iterations: residuals.len() + 1 });
        }
        if let Some(&prev) = residuals.last() {
            if prev > 1e-12 * eta {
                contraction = contraction.max(res / prev);
            }
        }
        residuals.push(res);
        phi = next;
        if res <= 1e-15 * eta {
            break;
        }
        if residuals.len() >= max_iter {
            return Err(Error::NoContraction { ratio: contraction, iterations: residuals.len() });
        }
    }
    Ok(FarFieldSolution { eta, mu, r1, residuals, contraction, tail_exponent: n2, phi, flux })
}

/// Fast-decay solution with `r^{N−2} v → η`, doubling `R₁` (at most 30 times) until the
/// measured contraction factor is at most 1/3.
pub fn fast_decay_solve(spec: &ProblemSpec, eta: f64, r1: f64, max_iter: usize) -> Result<FarFieldSolution> {
    let mut r = r1;
    let mut last = f64::INFINITY;
    for _ in 0..=30 {
        match picard_fixed(spec, eta, r, max_iter) {
            Ok(sol) if sol.contraction <= CONTRACTION_LIMIT => return Ok(sol),
            Ok(sol) => last = sol.contraction,
            Err(Error::NoContraction { ratio, .. }) => last = ratio,
            Err(e) => return Err(e),
        }
        r *= 2.0;
    }
    Err(Error::NoContraction { ratio: last, iterations: max_iter })
}

/// Kelvin-transformed homogeneous exterior profile `v̄(·, 1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FarProfile {
    pub n: u32,
    pub p: f64,
    pub beta: f64,
    pub k_inf: f64,
    pub beta_tilde: f64,
    /// First zero of `ṽ`.
    pub r_tilde: f64,
    /// `1 / r̃`: `v̄(·, 1)` is positive exactly on `(r̄, ∞)`.
    pub r_bar: f64,
    pub theta_tilde: f64,
    pub c_tilde: f64,
    pub kelvin: RadialSolution,
}

impl FarProfile {
    /// `(v̄(r, 1), v̄'(r, 1))` for `r > r̄`.
    pub fn eval_unit(&self, r: f64) -> Option<(f64, f64)> {
        let n2 = self.n as f64 - 2.0;
        let s = 1.0 / r;
        let (v, dv) = self.kelvin.eval(s)?;
        let val = r.powf(-n2) * v;
        Some((val, -n2 * val / r - r.powf(-n2 - 2.0) * dv))
    }

    /// `v̄(r, η) = η^{-θ̃/c̃} v̄(η^{-1/c̃} r, 1)` and its derivative.
    pub fn eval(&self, r: f64, eta: f64) -> Option<(f64, f64)> {
        let k = eta.powf(-1.0 / self.c_tilde);
        let pre = eta.powf(-self.theta_tilde / self.c_tilde);
        let (v, dv) = self.eval_unit(k * r)?;
        Some((pre * v, pre * k * dv))
    }
}

/// Solves `ṽ'' + (N−1)/s ṽ' + k_∞ s^{β̃} ṽ₊^p = 0`, `ṽ(0) = 1`, with
/// `β̃ = (N−2)(p−1) − 4 − β`, and locates its first zero.
pub fn homogeneous_far_profile(n: u32, p: f64, beta: f64, k_inf: f64, opts: &SolverOptions) -> Result<FarProfile> {
    let tab = crate::exponents::build_exponent_table(n, p, beta, beta, k_inf, k_inf)?;
    if !(p > tab.p_s_alpha) {
        return Err(Error::Regime(format!("far profile needs p > p_S(beta) = {}, got {p}", tab.p_s_alpha)));
    }
    let beta_tilde = (n as f64 - 2.0) * (p - 1.0) - 4.0 - beta;
    let kelvin_spec = ProblemSpec::new(
        n,
        p,
        CoefficientProfile::PurePower { alpha: beta_tilde, k0: k_inf },
        ForcingProfile::Zero,
        0.0,
    )?;
    let stop = SolverOptions { stop_at_zero: true, ..*opts };
    let mut r_max = 10.0;
    loop {
        let sol = regular_solve(&kelvin_spec, 1.0, r_max, &stop)?;
        match sol.termination {
            Termination::HitZero { r0 } => {
                return Ok(FarProfile {
                    n,
                    p,
                    beta,
                    k_inf,
                    beta_tilde,
                    r_tilde: r0,
                    r_bar: 1.0 / r0,
                    theta_tilde: tab.theta_tilde,
                    c_tilde: tab.c_tilde,
                    kelvin: sol,
                })
            }
            Termination::ReachedRmax if r_max < 1e12 => r_max *= 100.0,
            Termination::ReachedRmax => return Err(Error::Budget("Kelvin profile has no zero below 1e12".into())),
            t => return Err(t.failure().expect("abnormal termination")),
        }
    }
}

/// Outcome of [`eta_limit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaLimit {
    Fast {
        eta: f64,
        direct: f64,
        formula: f64,
    },
    /// `r^{N−2} u` keeps growing while `r^{θ̃} u` settles near this value.
    SlowDecayDetected {
        weighted_limit: f64,
    },
    Undetermined {
        direct: f64,
        formula: f64,
    },
}

/// Estimates `η = lim r^{N−2} u(r)` from the last decade of a positive trajectory.
///
/// The direct estimate extrapolates `r^{N−2}u` at `r_max/100, r_max/10, r_max` (Aitken).
/// The formula estimate is `η = (−r^{N−1}u'(r) + ∫_r^∞ s^{N−1}(K (η s^{2−N})^p + μ f) ds)/(N−2)`
/// at `r = r_max`. `r1` is the reference radius for slow-decay growth.
pub fn eta_limit(sol: &RadialSolution, r1: f64) -> Result<EtaLimit> {
    if let Termination::HitZero { r0 } = sol.termination {
        return Err(Error::Positivity { r0 });
    }
    let spec = &sol.spec;
    let n2 = spec.nf() - 2.0;
    let r_max = sol.r_max();
    if !(r_max >= 100.0 * r1) || !(sol.r_min() <= r1) {
        return Err(Error::Coverage { lo: r1, hi: 100.0 * r1 });
    }
    let at = |r: f64| sol.eval(r).ok_or(Error::Coverage { lo: r, hi: r });
    let phi = |r: f64| at(r).map(|(u, _)| u * r.powf(n2));
    let (p0, p1, p2) = (phi(r_max / 100.0)?, phi(r_max / 10.0)?, phi(r_max)?);
    let theta_t = spec.table().theta_tilde;
    let psi = |r: f64| at(r).map(|(u, _)| u * r.powf(theta_t));
    let (q1, q2) = (psi(r_max / 10.0)?, psi(r_max)?);
    if p2 > 1e3 * phi(r1)? && (q2 / q1 - 1.0).abs() < 0.01 {
        return Ok(EtaLimit::SlowDecayDetected { weighted_limit: q2 });
    }
    let denom = (p2 - p1) - (p1 - p0);
    let direct =
        if denom.abs() > 1e-300 && (p2 - p1).abs() > 1e-15 * p2.abs() { p2 - (p2 - p1).powi(2) / denom } else { p2 };
    let (_, du) = at(r_max)?;
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-12, max_intervals: 2000 };
    let tail = |eta: f64| -> Result<f64> {
        let q = integrate_tail(
            |s| {
                let v = eta * s.powf(-n2);
                s.powf(n2 + 1.0) * spec.source(s, v)
            },
            r_max,
            opts,
        )?;
        Ok(q.value)
    };
    let mut formula = direct;
    for _ in 0..3 {
        formula = (-r_max.powf(n2 + 1.0) * du + tail(formula)?) / n2;
    }
    if (direct - formula).abs() <= 0.01 * formula.abs() {
        Ok(EtaLimit::Fast { eta: formula, direct, formula })
    } else {
        Ok(EtaLimit::Undetermined { direct, formula })
    }
}

/// `V(η) = R₁^{N−2} v_{η,μ}(R₁)`, its inverse `𝓗`, and `Ξ` at a fixed `R₁`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchingFunctions {
    pub spec: ProblemSpec,
    pub r1: f64,
    pub eta_window: (f64, f64),
    pub max_iter: usize,
}

impl MatchingFunctions {
    /// Picks `R₁ ≥ r1_start` (doubling) so that the Picard factor is at most 1/3 at both window ends.
    pub fn new(spec: &ProblemSpec, r1_start: f64, eta_window: (f64, f64)) -> Result<Self> {
        let (lo, hi) = eta_window;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::domain("eta window must satisfy 0 < lo < hi"));
        }
        let max_iter = 200;
        let a = fast_decay_solve(spec, lo, r1_start, max_iter)?;
        let b = fast_decay_solve(spec, hi, a.r1, max_iter)?;
        let r1 = if b.r1 > a.r1 { fast_decay_solve(spec, lo, b.r1, max_iter)?.r1 } else { b.r1 };
        Ok(Self { spec: spec.clone(), r1, eta_window, max_iter })
    }

    /// Uses `r1` as given; fails if the Picard factor exceeds 1/3 anywhere it is evaluated.
    pub fn at_radius(spec: &ProblemSpec, r1: f64, eta_window: (f64, f64)) -> Self {
        Self { spec: spec.clone(), r1, eta_window, max_iter: 200 }
    }

    pub fn solve(&self, eta: f64) -> Result<FarFieldSolution> {
        let sol = picard_fixed(&self.spec, eta, self.r1, self.max_iter)?;
        if sol.contraction > CONTRACTION_LIMIT {
            return Err(Error::NoContraction { ratio: sol.contraction, iterations: sol.residuals.len() });
        }
        Ok(sol)
    }

    pub fn v_of_eta(&self, eta: f64) -> Result<f64> {
        Ok(self.solve(eta)?.phi[grid().y.len() - 1])
    }

    /// Same `R₁` with the window stretched so that `ξ` lies well inside the admissible domain.
    pub fn widened_to(&self, xi: f64) -> Self {
        let target = xi * self.r1.powf(self.spec.nf() - 2.0);
        let (lo, hi) = self.eta_window;
        Self { eta_window: (lo.min(0.5 * target), hi.max(2.0 * target)), ..self.clone() }
    }

    /// Admissible `ξ` (a value of `u` at `R₁`).
    pub fn xi_domain(&self) -> (f64, f64) {
        let s = self.r1.powf(2.0 - self.spec.nf());
        (0.5 * self.eta_window.0 * s, 2.0 * self.eta_window.1 * s)
    }

    /// `𝓗(target)`: the `η` with `V(η) = target`, by Illinois iteration on a bracket grown from
    /// `bracket` (the window if `None`).
    pub fn h_inverse(&self, target: f64, bracket: Option<(f64, f64)>) -> Result<f64> {
        let (mut a, mut b) = bracket.unwrap_or(self.eta_window);
        let f = |e: f64| self.v_of_eta(e).map(|v| v - target);
        let (mut fa, mut fb) = (f(a)?, f(b)?);
        let mut grow = 0;
        while fa > 0.0 {
            a *= 0.5;
            fa = f(a)?;
            grow += 1;
            if grow > 60 {
                return Err(Error::NotBracketed("eta bracket for V did not close".into()));
            }
        }
        while fb < 0.0 {
            b *= 2.0;
            fb = f(b)?;
            grow += 1;
            if grow > 60 {
                return Err(Error::NotBracketed("eta bracket for V did not close".into()));
            }
        }
        let mut side = 0;
        for _ in 0..200 {
            if fa == 0.0 {
                return Ok(a);
            }
            if fb == 0.0 || (b - a) <= 1e-15 * b {
                return Ok(if fb.abs() < fa.abs() { b } else { a });
            }
            let c = (a * fb - b * fa) / (fb - fa);
            let c = if c > a && c < b { c } else { 0.5 * (a + b) };
            let fc = f(c)?;
            if fc.abs() <= 1e-14 * target.abs() {
                return Ok(c);
            }
            if (fc < 0.0) == (fa < 0.0) {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// `(η, Ξ(ξ))` with `V(η) = R₁^{N−2} ξ` and `Ξ = v'_{η,μ}(R₁)`.
    pub fn xi(&self, xi: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.xi_domain();
        if !(xi > lo && xi < hi) {
            return Err(Error::Window { value: xi, lo, hi });
        }
        let eta = self.h_inverse(self.r1.powf(self.spec.nf() - 2.0) * xi, None)?;
        let sol = self.solve(eta)?;
        Ok((eta, sol.eval(self.r1).expect("R1 in range").1))
    }

    /// Forward differences of `V` at 5 points across the window.
    pub fn v_slopes(&self) -> Result<Vec<f64>> {
        let (lo, hi) = self.eta_window;
        (0..5)
            .map(|i| {
                let e = lo * (hi / lo).powf(i as f64 / 4.0);
                let h = 1e-4 * e;
                Ok((self.v_of_eta(e + h)? - self.v_of_eta(e)?) / h)
            })
            .collect()
    }
}

/// `(η, Ξ(ξ))` at the given `R₁` and window.
pub fn matching_xi(spec: &ProblemSpec, r1: f64, xi: f64, eta_window: (f64, f64)) -> Result<(f64, f64)> {
    MatchingFunctions::at_radius(spec, r1, eta_window).xi(xi)
}

/// `H(μ) = u*'_μ(R₁) − Ξ(u*_μ(R₁), μ)` with the data `(u*(R₁), u*'(R₁))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub mu: f64,
    pub h: f64,
    pub eta: f64,
    pub u_r1: f64,
    pub du_r1: f64,
}

/// Evaluates `H(μ)`; `star` must be the singular solution for `matching.spec.with_mu(mu)`.
pub fn mismatch_h(matching: &MatchingFunctions, star: &crate::singular::SingularSolution) -> Result<Mismatch> {
    let r1 = matching.r1;
    if let Some(r0) = star.first_zero().filter(|&r0| r0 <= r1) {
        return Err(Error::Positivity { r0 });
    }
    let (u, du) = star.eval(r1).ok_or(Error::Coverage { lo: r1, hi: r1 })?;
    let m = MatchingFunctions { spec: star.solution.spec.clone(), ..matching.clone() };
    let (eta, xi) = m.xi(u)?;
    Ok(Mismatch { mu: star.solution.spec.mu, h: du - xi, eta, u_r1: u, du_r1: du })
}

/// Builds `u*_μ` to `R₁` and evaluates `H(μ)`.
pub fn mismatch_h_at(matching: &MatchingFunctions, mu: f64, opts: &SolverOptions) -> Result<Mismatch> {
    let spec = matching.spec.with_mu(mu);
    let star = crate::singular::singular_extend(&spec, matching.r1 * 1.001, opts)?;
    mismatch_h(matching, &star)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    /// `∫ −ã w̃'²` over each interval.
    pub dissipation: Vec<f64>,
    /// `∫ w̃'((k_∞ − L̃) w̃₊^p − μ g̃)` over each interval.
    pub drift: Vec<f64>,
    /// Largest `|ΔE − dissipation − drift| / max(1, |E|)`.
    pub balance_error: f64,
    /// `true` when `E` never increases by more than the balance tolerance.
    pub nonincreasing: bool,
    pub w_end: f64,
    pub dw_end: f64,
    pub gamma_tilde: f64,
}

/// `E(t) = ½w̃'² − (Ã^{p−1}/2) w̃² + k_∞/(p+1) w̃₊^{p+1}` along `w̃ = e^{θ̃t} u(e^t)` on `[t0, t1]`.
pub fn slow_decay_energy(sol: &RadialSolution, t0: f64, t1: f64, intervals: usize) -> Result<EnergyReport> {
    let spec = &sol.spec;
    let tab = *spec.table();
    let (p, kinf, mu) = (spec.p, tab.k_inf, spec.mu);
    let ap = tab.a_tilde_pow();
    let state = |t: f64| sol.weighted_at_t(t, tab.theta_tilde).ok_or(Error::Coverage { lo: t0.exp(), hi: t1.exp() });
    let energy = |w: f64, dw: f64| 0.5 * dw * dw - 0.5 * ap * w * w + kinf / (p + 1.0) * w.max(0.0).powf(p + 1.0);
    let (x, wq) = gauss_legendre(NODES);
    let m = intervals.max(1);
    let ts: Vec<f64> = (0..=m).map(|i| t0 + (t1 - t0) * i as f64 / m as f64).collect();
    let mut e = Vec::with_capacity(m + 1);
    for &t in &ts {
        let [w, dw] = state(t)?;
        e.push(energy(w, dw));
    }
    let mut dissipation = Vec::with_capacity(m);
    let mut drift = Vec::with_capacity(m);
    let mut balance_error: f64 = 0.0;
    let mut nonincreasing = true;
    for k in 0..m {
        let (a, b) = (ts[k], ts[k + 1]);
        let half = 0.5 * (b - a);
        let (mut dis, mut dri) = (0.0, 0.0);
        for (xi, wi) in x.iter().zip(&wq) {
            let t = 0.5 * (a + b) + half * xi;
            let [w, dw] = state(t)?;
            let (l, g) = far_field_coeffs(spec, t);
            dis += wi * half * (-tab.a_tilde * dw * dw);
            dri += wi * half * dw * ((kinf - l) * w.max(0.0).powf(p) - if mu == 0.0 { 0.0 } else { mu * g });
        }
        let scale = e[k].abs().max(1.0);
        let err = ((e[k + 1] - e[k]) - dis - dri).abs() / scale;
        balance_error = balance_error.max(err);
        if e[k + 1] - e[k] > 1e-8 * scale + dri.max(0.0) {
            nonincreasing = false;
        }
        dissipation.push(dis);
        drift.push(dri);
    }
    let [w_end, dw_end] = state(t1)?;
    Ok(EnergyReport {
        t: ts,
        energy: e,
        dissipation,
        drift,
        balance_error,
        nonincreasing,
        w_end,
        dw_end,
        gamma_tilde: tab.gamma_tilde,
    })
}
