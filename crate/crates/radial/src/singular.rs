//! The singular solution `u*` with `r^θ u*(r) → γ` as `r → 0`.
//!
//! In `w = e^{θt} u*(e^t)` the solution is the trajectory that stays at the equilibrium
//! `γ` as `t → −∞`. Both roots of `λ² + aλ + (p−1)A^{p−1}` have negative real part when
//! `p > p_S(α)`, so integrating forward from a deep `t_start` damps any error in the
//! initial data. The initial data are `γ + z_p`, where `z_p` is the response of the
//! linearization to `(k₀ − L)γ^p − μg`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{emden_fowler_coeffs, CoefficientProfile, ProblemSpec};
use crate::quadrature::{integrate, QuadOptions};
use crate::shooting::{
    emden_fowler_rhs, regular_solve, run_trajectory, EfTrajectory, RadialSolution, SolverOptions, StateForm,
    Termination, Zeta,
};

/// Deepest admissible start (keeps `e^{-θt}` finite in samples).
fn t_floor(theta: f64) -> f64 {
    (-600.0 / theta.max(1.0)).max(-300.0)
}

fn require_supercritical(spec: &ProblemSpec) -> Result<()> {
    let tab = spec.table();
    if !(tab.a > 0.0) {
        return Err(Error::Regime(format!(
            "singular construction needs p > p_S(alpha) = {}, got p = {}",
            tab.p_s_alpha, spec.p
        )));
    }
    Ok(())
}

/// Impulse response `G(τ)` and `G'(τ)` of `z'' + a z' + (p−1)A^{p−1} z`.
fn green(roots: [Complex64; 2], tau: f64) -> (f64, f64) {
    let [l1, l2] = roots;
    if l1.im != 0.0 {
        let (s, w) = (l1.re, l1.im.abs());
        let e = (s * tau).exp();
        let (sn, cs) = (w * tau).sin_cos();
        (e * sn / w, e * (s * sn + w * cs) / w)
    } else {
        let (a, b) = (l1.re, l2.re);
        let (ea, eb) = ((a * tau).exp(), (b * tau).exp());
        ((ea - eb) / (a - b), (a * ea - b * eb) / (a - b))
    }
}

fn linear_forcing(spec: &ProblemSpec, t: f64) -> f64 {
    let tab = spec.table();
    let (l, g) = emden_fowler_coeffs(spec, t);
    (tab.k0 - l) * tab.gamma.powf(spec.p) - spec.mu * g
}

fn has_linear_forcing(spec: &ProblemSpec) -> bool {
    let pure = matches!(spec.k, CoefficientProfile::PurePower { .. });
    !(pure && (spec.mu == 0.0 || spec.f.is_zero()))
}

/// `(z_p(t), z_p'(t))`: causal response of the linearization to `(k₀ − L)γ^p − μg`.
pub fn linear_response(spec: &ProblemSpec, t: f64) -> Result<(f64, f64)> {
    if !has_linear_forcing(spec) {
        return Ok((0.0, 0.0));
    }
    let roots = spec.table().characteristic_roots();
    let slow = roots[0].re.abs();
    let tau_max = 40.0 / slow;
    let opts = QuadOptions { abs_tol: 1e-18, rel_tol: 1e-12, max_intervals: 4000 };
    let z = integrate(|tau| green(roots, tau).0 * linear_forcing(spec, t - tau), 0.0, tau_max, opts)?;
    let dz = integrate(|tau| green(roots, tau).1 * linear_forcing(spec, t - tau), 0.0, tau_max, opts)?;
    Ok((z.value, dz.value))
}

/// Local singular trajectory in the Emden–Fowler variable.
#[derive(Debug, Clone)]
pub struct LocalSingular {
    pub gamma: f64,
    pub t_start: f64,
    pub trajectory: EfTrajectory,
}

impl LocalSingular {
    /// `z(t) = w(t) − γ`.
    pub fn z(&self, t: f64) -> Option<f64> {
        Some(self.trajectory.eval(t)?[0] - self.gamma)
    }
}

/// Forward integration of the `w` equation from `w(t_start) = γ + z_p(t_start)`.
pub fn singular_local(spec: &ProblemSpec, t_start: f64, t_end: f64, opts: &SolverOptions) -> Result<LocalSingular> {
    require_supercritical(spec)?;
    let gamma = spec.table().gamma;
    let (zp, dzp) = linear_response(spec, t_start)?;
    let trajectory = crate::shooting::integrate_emden_fowler(spec, gamma + zp, dzp, t_start, t_end, opts)?;
    Ok(LocalSingular { gamma, t_start, trajectory })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    ForwardIntegration,
    PicardOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Positivity {
    PositiveUpTo { r_max: f64 },
    FailsAt { r0: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularSolution {
    pub solution: RadialSolution,
    pub t_start: f64,
    pub construction: Construction,
    pub positivity: Positivity,
    /// Relative change of `w` at the check point when `t_start` is raised by 10.
    pub richardson_delta: f64,
    pub check_t: f64,
}

impl SingularSolution {
    pub fn eval(&self, r: f64) -> Option<(f64, f64)> {
        self.solution.eval(r)
    }

    pub fn is_positive(&self) -> bool {
        matches!(self.positivity, Positivity::PositiveUpTo { .. })
    }

    pub fn first_zero(&self) -> Option<f64> {
        match self.positivity {
            Positivity::FailsAt { r0 } => Some(r0),
            _ => None,
        }
    }
}

fn forward_run(spec: &ProblemSpec, t_start: f64, t_end: f64, opts: &SolverOptions) -> Result<RadialSolution> {
    let gamma = spec.table().gamma;
    let (zp, dzp) = linear_response(spec, t_start)?;
    let form = StateForm::EmdenFowler { theta: spec.table().theta };
    let sol =
        run_trajectory(spec, Zeta::Singular, emden_fowler_rhs(spec), form, t_start, [gamma + zp, dzp], t_end, opts);
    if let Some(e) = sol.termination.failure() {
        return Err(e);
    }
    Ok(sol)
}

/// Builds `u*` on `[e^{t_start}, r_max]` (or up to its first zero), lowering `t_start`
/// in steps of 10 until raising it by 10 changes `w` at the check point by < 1e-8.
pub fn singular_extend(spec: &ProblemSpec, r_max: f64, opts: &SolverOptions) -> Result<SingularSolution> {
    require_supercritical(spec)?;
    opts.validate()?;
    if !(r_max > 0.0) {
        return Err(Error::domain("r_max must be positive"));
    }
    let t_end = r_max.ln();
    let theta = spec.table().theta;
    let mut t_start = opts.t_start.min(t_end - 20.0);
    loop {
        let full = forward_run(spec, t_start, t_end, opts)?;
        let t_last = full.r_max().ln();
        let check_t = 0f64.min(t_last - 0.5).max(t_start + 12.0);
        let shallow = forward_run(spec, t_start + 10.0, check_t, opts)?;
        let delta = match (full.weighted_at_t(check_t, theta), shallow.weighted_at_t(check_t, theta)) {
            (Some(a), Some(b)) => ((a[0] - b[0]) / a[0]).abs(),
            _ => f64::INFINITY,
        };
        if delta < 1e-8 || t_start - 10.0 < t_floor(theta) {
            if !(delta < 1e-8) {
                return Err(Error::Budget(format!(
                    "singular construction not converged at t_start = {t_start} (delta = {delta:.3e})"
                )));
            }
            let positivity = match full.termination {
                Termination::HitZero { r0 } => Positivity::FailsAt { r0 },
                _ => Positivity::PositiveUpTo { r_max },
            };
            return Ok(SingularSolution {
                solution: full,
                t_start,
                construction: Construction::ForwardIntegration,
                positivity,
                richardson_delta: delta,
                check_t,
            });
        }
        t_start -= 10.0;
    }
}

/// `u*₀(r) = {θ(N−2−θ)}^{1/(p−1)} k₀^{-1/(p−1)} r^{-θ}` for `K = k₀ r^α`, `μ = 0`.
pub fn explicit_singular(spec: &ProblemSpec, r: f64) -> f64 {
    let tab = spec.table();
    tab.gamma * r.powf(-tab.theta)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardResult {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub dz: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PicardResult {
    /// Largest observed ratio of consecutive residuals.
    pub fn max_ratio(&self) -> f64 {
        self.residuals.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).fold(0.0, f64::max)
    }
}

/// Picard iteration `z_{k+1} = Z[(k₀−L)γ^p − μg − p(L−k₀)γ^{p−1} z_k − L N(z_k)]` on a
/// uniform grid of spacing `dt` over `[t_start, t_end]`, where `Z` is the causal
/// solution operator of `z'' + a z' + (p−1)A^{p−1} z = h` (exact for piecewise-linear `h`)
/// and `N(z) = (γ+z)_+^p − γ^p − pγ^{p−1}z`.
pub fn picard_singular_oracle(
    spec: &ProblemSpec,
    t_start: f64,
    t_end: f64,
    dt: f64,
    max_iter: usize,
) -> Result<PicardResult> {
    require_supercritical(spec)?;
    if !(t_end > t_start) || !(dt > 0.0) {
        return Err(Error::domain("picard grid needs t_end > t_start and dt > 0"));
    }
    let tab = *spec.table();
    let (gamma, p, k0) = (tab.gamma, spec.p, tab.k0);
    let [l1, l2] = tab.characteristic_roots();
    if (l1 - l2).norm() < 1e-8 {
        return Err(Error::Regime("repeated characteristic root".into()));
    }
    let n = ((t_end - t_start) / dt).ceil() as usize;
    let h = (t_end - t_start) / n as f64;
    let t: Vec<f64> = (0..=n).map(|i| t_start + h * i as f64).collect();
    let coeffs: Vec<(f64, f64)> = t.iter().map(|&s| emden_fowler_coeffs(spec, s)).collect();
    let base: Vec<f64> = coeffs.iter().map(|&(l, g)| (k0 - l) * gamma.powf(p) - spec.mu * g).collect();

    // Exact propagation of I' = λ I + h over one cell with h linear in time.
    let weights = |l: Complex64| {
        let e = (l * h).exp();
        let phi1 = (e - 1.0) / l;
        let w1 = phi1 - (e * (l * h - 1.0) + 1.0) / (l * l * h);
        (e, phi1 - w1, w1)
    };
    let (e1, a1, b1) = weights(l1);
    let (e2, a2, b2) = weights(l2);
    let gp1 = p * gamma.powf(p - 1.0);

    let mut z = vec![0.0; n + 1];
    let mut dz = vec![0.0; n + 1];
    let mut residuals = Vec::new();
    let mut non_contracting = 0;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let src: Vec<f64> = z
            .iter()
            .zip(&coeffs)
            .zip(&base)
            .map(|((&zi, &(l, _)), &b)| {
                let w = gamma + zi;
                let wp = if w > 0.0 { w.powf(p) } else { 0.0 };
                let nl = wp - gamma.powf(p) - gp1 * zi;
                b - (l - k0) * gp1 * zi - l * nl
            })
            .collect();
        let (mut i1, mut i2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut znew = vec![0.0; n + 1];
        let mut dznew = vec![0.0; n + 1];
        for i in 0..n {
            i1 = e1 * i1 + a1 * src[i] + b1 * src[i + 1];
            i2 = e2 * i2 + a2 * src[i] + b2 * src[i + 1];
            znew[i + 1] = ((i1 - i2) / (l1 - l2)).re;
            dznew[i + 1] = ((l1 * i1 - l2 * i2) / (l1 - l2)).re;
        }
        let res = znew.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if let Some(&prev) = residuals.last() {
            if res >= prev && prev > 0.0 {
                non_contracting += 1;
                if non_contracting >= 3 {
                    return Err(Error::NoContraction { ratio: res / prev, iterations });
                }
            } else {
                non_contracting = 0;
            }
        }
        residuals.push(res);
        z = znew;
        dz = dznew;
        if res <= 1e-14 * gamma {
            converged = true;
            break;
        }
    }
    Ok(PicardResult { t, z, dz, residuals, iterations, converged })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub zeta: f64,
    /// `max |u(r, ζ) − u*(r)|` over the probes.
    pub sup_u: f64,
    /// `max |u_r(r, ζ) − u*'(r)|` over the probes.
    pub sup_du: f64,
    /// `max r^θ |u(r, ζ) − u*(r)| / γ` over the probes.
    pub weighted: f64,
}

/// Distance of `u(·, ζ)` from `u*` on the probe radii, for each `ζ`.
pub fn convergence_to_singular(
    spec: &ProblemSpec,
    zeta_list: &[f64],
    probes: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<ConvergenceRow>> {
    let r_hi = probes.iter().cloned().fold(0.0, f64::max);
    if !(r_hi > 0.0) || probes.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::domain("probe radii must be positive"));
    }
    let star = singular_extend(spec, r_hi * 1.01, opts)?;
    if let Some(r0) = star.first_zero() {
        return Err(Error::Positivity { r0 });
    }
    let tab = spec.table();
    let no_stop = SolverOptions { stop_at_zero: false, ..*opts };
    zeta_list
        .iter()
        .map(|&zeta| {
            let sol = regular_solve(spec, zeta, r_hi * 1.01, &no_stop)?;
            let mut row = ConvergenceRow { zeta, sup_u: 0.0, sup_du: 0.0, weighted: 0.0 };
            for &r in probes {
                let (u, du) = sol.eval(r).ok_or(Error::Coverage { lo: r, hi: r })?;
                let (us, dus) = star.eval(r).ok_or(Error::Coverage { lo: r, hi: r })?;
                row.sup_u = row.sup_u.max((u - us).abs());
                row.sup_du = row.sup_du.max((du - dus).abs());
                row.weighted = row.weighted.max(r.powf(tab.theta) * (u - us).abs() / tab.gamma);
            }
            Ok(row)
        })
        .collect()
}

/// `sup r^θ |u(r, ζ) − u*(r)| / γ` over `r ∈ [σ ζ^{-1/θ}, ρ]` (64 log-spaced points per decade).
pub fn closeness_window(
    spec: &ProblemSpec,
    star: &SingularSolution,
    zeta: f64,
    sigma: f64,
    rho: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let tab = spec.table();
    let lo = sigma * zeta.powf(-1.0 / tab.theta);
    if !(lo < rho) {
        return Err(Error::domain("empty closeness window"));
    }
    let no_stop = SolverOptions { stop_at_zero: false, ..*opts };
    let sol = regular_solve(spec, zeta, rho * 1.01, &no_stop)?;
    let m = ((rho / lo).log10() * 64.0).ceil().max(2.0) as usize;
    let mut worst: f64 = 0.0;
    for i in 0..=m {
        let r = lo * (rho / lo).powf(i as f64 / m as f64);
        let (u, _) = sol.eval(r).ok_or(Error::Coverage { lo, hi: rho })?;
        let (us, _) = star.eval(r).ok_or(Error::Coverage { lo, hi: rho })?;
        worst = worst.max(r.powf(tab.theta) * (u - us).abs() / tab.gamma);
    }
    Ok(worst)
}
