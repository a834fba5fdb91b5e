//! Intersection numbers `Z_(0,ρ)[u* − u(·, ζ)]` and the homogeneous crossing sequence `σ_n`.
//!
//! Two counters are provided. [`count_intersections`] compares any two sampled trajectories
//! on a merged grid. [`count_against_singular`] integrates `D = u − u*` directly alongside
//! `u*`, so the sign of `D` stays reliable even where `|D| ≪ u*`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate, Dense, Flow, Options};
use crate::profiles::ProblemSpec;
use crate::shooting::{series_at, series_start, RadialSolution, SolverOptions, Termination, Zeta};
use crate::singular::{singular_extend, SingularSolution};

/// How precisely a crossing was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// Bisected on re-evaluated data.
    Refined,
    /// Sign change across a stretch below the noise threshold; located at its midpoint.
    GridLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub zeta: f64,
    pub rho: f64,
    pub count: usize,
    pub crossings: Vec<f64>,
    pub resolution_flags: Vec<Resolution>,
    /// Near-misses: the difference dropped below the noise threshold without changing sign.
    pub tangencies: Vec<f64>,
    /// The difference never rose above the noise threshold.
    pub degenerate: bool,
    /// Sign of the difference just above the lower end of the interval (0 if degenerate).
    pub initial_sign: i8,
    /// Sign of the difference just after each crossing.
    pub signs_after: Vec<i8>,
}

impl IntersectionReport {
    /// `true` when the crossings increase and the difference switches sign at each one.
    pub fn alternates(&self) -> bool {
        let mut prev = self.initial_sign;
        self.crossings.windows(2).all(|w| w[0] < w[1])
            && self.signs_after.iter().all(|&s| {
                let ok = s == -prev;
                prev = s;
                ok
            })
    }
}

/// Tracks the sign of a scalar along a monotone sequence of points.
struct SignTracker {
    initial: i8,
    last: Option<(f64, i8)>,
    quiet_since: Option<f64>,
    crossings: Vec<f64>,
    flags: Vec<Resolution>,
    signs: Vec<i8>,
    tangencies: Vec<f64>,
}

impl SignTracker {
    fn new() -> Self {
        Self {
            initial: 0,
            last: None,
            quiet_since: None,
            crossings: vec![],
            flags: vec![],
            signs: vec![],
            tangencies: vec![],
        }
    }

    /// Feeds the point `x` with value `v` and noise threshold `thr`; `refine(lo, hi)` bisects
    /// a clean bracket.
    fn push(&mut self, x: f64, v: f64, thr: f64, refine: impl FnOnce(f64, f64) -> f64) {
        if v.abs() <= thr {
            self.quiet_since.get_or_insert(x);
            return;
        }
        let s = if v > 0.0 { 1 } else { -1 };
        match (self.last, self.quiet_since.take()) {
            (None, _) => self.initial = s,
            (Some((_, ls)), Some(q)) if ls == s => self.tangencies.push(0.5 * (q + x)),
            (Some((_, ls)), Some(q)) if ls != s => {
                self.crossings.push(0.5 * (q + x));
                self.flags.push(Resolution::GridLevel);
                self.signs.push(s);
            }
            (Some((lx, ls)), None) if ls != s => {
                self.crossings.push(refine(lx, x));
                self.flags.push(Resolution::Refined);
                self.signs.push(s);
            }
            _ => {}
        }
        self.last = Some((x, s));
    }

    fn finish(mut self, zeta: f64, rho: f64, to_r: impl Fn(f64) -> f64) -> IntersectionReport {
        if let (Some(q), Some(_)) = (self.quiet_since, self.last) {
            self.tangencies.push(q);
        }
        let crossings: Vec<f64> = self.crossings.iter().map(|&x| to_r(x)).collect();
        IntersectionReport {
            zeta,
            rho,
            count: crossings.len(),
            crossings,
            resolution_flags: self.flags,
            tangencies: self.tangencies.iter().map(|&x| to_r(x)).collect(),
            degenerate: self.last.is_none(),
            initial_sign: self.initial,
            signs_after: self.signs,
        }
    }
}

fn covers(sol: &RadialSolution, lo: f64, hi: f64) -> bool {
    let end = match sol.termination {
        Termination::HitZero { r0 } => r0,
        _ => sol.r_max(),
    };
    sol.r_min() <= lo * (1.0 + 1e-12) && end >= hi * (1.0 - 1e-12)
}

fn zeta_of(sol: &RadialSolution) -> Option<f64> {
    match sol.zeta {
        Zeta::Regular(z) => Some(z),
        _ => None,
    }
}

/// Counts sign changes of `u_a − u_b` on `(r_lo, r_hi)`.
///
/// The grid merges both trajectories' sample radii with 64 log-uniform points per decade.
/// Values with `|u_a − u_b| < 10 (rtol max(|u_a|,|u_b|) + atol)` are treated as zero.
pub fn count_intersections(a: &RadialSolution, b: &RadialSolution, interval: (f64, f64)) -> Result<IntersectionReport> {
    let (lo, hi) = interval;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::domain("interval must satisfy 0 < r_lo < r_hi"));
    }
    for s in [a, b] {
        if !covers(s, lo, hi) {
            return Err(Error::Coverage { lo, hi });
        }
    }
    let rtol = a.rtol.max(b.rtol);
    let atol = a.atol.max(b.atol);
    let diff = |r: f64| -> Option<(f64, f64)> {
        let (ua, _) = a.eval(r)?;
        let (ub, _) = b.eval(r)?;
        Some((ua - ub, 10.0 * (rtol * ua.abs().max(ub.abs()) + atol)))
    };
    let m = ((hi / lo).log10() * 64.0).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..=m).map(|i| lo * (hi / lo).powf(i as f64 / m as f64)).collect();
    grid.extend(a.samples.iter().chain(&b.samples).map(|s| s.r).filter(|&r| r > lo && r < hi));
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut tracker = SignTracker::new();
    for &r in &grid {
        let (d, thr) = diff(r).ok_or(Error::Coverage { lo, hi })?;
        tracker.push(r, d, thr, |mut x0, mut x1| {
            let s0 = diff(x0).map_or(0.0, |v| v.0).signum();
            for _ in 0..100 {
                let mid = 0.5 * (x0 + x1);
                if x1 - x0 <= 1e-14 * mid {
                    break;
                }
                match diff(mid) {
                    Some((v, _)) if v.signum() == s0 => x0 = mid,
                    _ => x1 = mid,
                }
            }
            0.5 * (x0 + x1)
        });
    }
    let zeta = zeta_of(b).or(zeta_of(a)).unwrap_or(f64::NAN);
    Ok(tracker.finish(zeta, hi, |r| r))
}

/// `max(us + d, 0)^p − max(us, 0)^p` without cancellation when both bases are positive.
fn power_difference(us: f64, d: f64, p: f64) -> f64 {
    let v = us + d;
    if us > 0.0 && v > 0.0 {
        us.powf(p) * (p * (d / us).ln_1p()).exp_m1()
    } else {
        v.max(0.0).powf(p) - us.max(0.0).powf(p)
    }
}

/// Integrates `(u*, r u*_r, D, r D_r)` in `t = ln r` from `r0` to `r_end`, with `D = u − u*`,
/// and tracks the sign of `D`. `stop_after` ends the run once that many crossings are found.
#[allow(clippy::too_many_arguments)]
fn difference_engine(
    spec: &ProblemSpec,
    zeta: f64,
    r0: f64,
    star0: (f64, f64),
    reg0: (f64, f64),
    r_end: f64,
    opts: &SolverOptions,
    stop_after: Option<usize>,
) -> Result<IntersectionReport> {
    let n2 = spec.nf() - 2.0;
    let p = spec.p;
    let rhs = |t: f64, y: &[f64; 4]| {
        let r = t.exp();
        let r2 = r * r;
        let k = spec.k.eval(r);
        [y[1], -n2 * y[1] - r2 * spec.source(r, y[0]), y[3], -n2 * y[3] - r2 * k * power_difference(y[0], y[2], p)]
    };
    let y0 = [star0.0, star0.1, reg0.0 - star0.0, reg0.1 - star0.1];
    let iopts = Options { rtol: opts.rtol, atol: 1e-300, h_max: opts.max_dt, h_init: None, max_steps: opts.max_steps };
    let rtol = opts.rtol;
    // Noise floor relative to the local oscillation amplitude of D.
    let thr = |y: &[f64; 4]| 10.0 * rtol * y[2].hypot(y[3]);
    let mut tracker = SignTracker::new();
    tracker.push(r0.ln(), y0[2], thr(&y0), |_, x| x);
    let sub = 8;
    integrate(rhs, r0.ln(), y0, r_end.ln(), &iopts, |d: &Dense<4>, _| {
        for j in 1..=sub {
            let t = d.t_old + d.h * j as f64 / sub as f64;
            let y = d.eval(t);
            tracker.push(t, y[2], thr(&y), |lo, hi| {
                let lo = lo.max(d.t_old);
                d.locate(|s| s[2], lo, hi, 0.0)
            });
        }
        match stop_after {
            Some(n) if tracker.crossings.len() >= n => Flow::Stop,
            _ => Flow::Continue,
        }
    })?;
    Ok(tracker.finish(zeta, r_end, f64::exp))
}

/// Start radius and regular data for the difference engine: well inside the scale `ζ^{-1/θ}`.
fn regular_start(spec: &ProblemSpec, zeta: f64, opts: &SolverOptions) -> (f64, f64, f64) {
    let r_series = series_start(spec, zeta, opts).0;
    let r0 = r_series.min(1e-4 * zeta.powf(-1.0 / spec.table().theta));
    series_at(spec, zeta, r0)
}

/// `Z_(0,ρ)[u(·, ζ) − u*]`, integrating the difference directly from near the origin.
///
/// `star` supplies `u*` at the start radius; a deeper copy is built when it does not reach down.
pub fn count_against_singular(
    spec: &ProblemSpec,
    star: &SingularSolution,
    zeta: f64,
    rho: f64,
    opts: &SolverOptions,
) -> Result<IntersectionReport> {
    if !(zeta > 0.0) || !(rho > 0.0) {
        return Err(Error::domain("zeta and rho must be positive"));
    }
    let (r0, u0, s0) = regular_start(spec, zeta, opts);
    if r0 >= rho {
        return Err(Error::domain("rho lies inside the series region"));
    }
    let at = |s: &SingularSolution| s.eval(r0).map(|(u, du)| (u, r0 * du));
    let star0 = match at(star) {
        Some(v) => v,
        None => {
            let deeper = SolverOptions { t_start: opts.t_start.min(r0.ln() - 10.0), ..*opts };
            let s = singular_extend(spec, r0 * 2.0, &deeper)?;
            at(&s).ok_or(Error::Coverage { lo: r0, hi: rho })?
        }
    };
    difference_engine(spec, zeta, r0, star0, (u0, s0), rho, opts, None)
}

fn require_oscillatory(spec: &ProblemSpec) -> Result<()> {
    let tab = spec.table();
    if !(tab.a > 0.0) || !tab.p_jl_alpha.exceeds(spec.p) {
        return Err(Error::Regime(format!(
            "crossing sequence needs p_S(alpha) < p < p_JL(alpha); p_S = {}, p_JL = {}, p = {}",
            tab.p_s_alpha, tab.p_jl_alpha, spec.p
        )));
    }
    Ok(())
}

/// Largest radius searched for crossings of the scaled problem.
const SIGMA_LIMIT: f64 = 1e40;

/// First `n_max` crossings `σ_n` of `ū(σ, 1)` (regular, `K = k₀ r^α`, `μ = 0`) with `γ σ^{-θ}`.
pub fn sigma_sequence(n: u32, p: f64, alpha: f64, k0: f64, n_max: usize, opts: &SolverOptions) -> Result<Vec<f64>> {
    let spec = ProblemSpec::homogeneous(n, p, alpha, k0)?;
    require_oscillatory(&spec)?;
    let tab = spec.table();
    let (r0, u0, s0) = regular_start(&spec, 1.0, opts);
    let star = tab.gamma * r0.powf(-tab.theta);
    let rep = difference_engine(&spec, 1.0, r0, (star, -tab.theta * star), (u0, s0), SIGMA_LIMIT, opts, Some(n_max))?;
    if rep.count < n_max {
        return Err(Error::Budget(format!("only {} crossings below sigma = {SIGMA_LIMIT:e}", rep.count)));
    }
    if rep.initial_sign != -1 || rep.resolution_flags.iter().any(|f| *f != Resolution::Refined) {
        return Err(Error::Budget("crossing sequence not cleanly resolved".into()));
    }
    Ok(rep.crossings[..n_max].to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub zeta: f64,
    pub count: usize,
    pub crossings: Vec<f64>,
    /// `r_k ζ^{1/θ}` for the first crossings.
    pub scaled: Vec<f64>,
    /// Largest `|r_k ζ^{1/θ} / σ_k − 1|` over the first three crossings, when `σ_k` is available.
    pub location_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub rho: f64,
    pub rows: Vec<GrowthRow>,
    pub nondecreasing: bool,
    pub sigma: Vec<f64>,
}

impl GrowthTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["zeta", "count"])?;
        for row in &self.rows {
            out.write_record([format!("{:e}", row.zeta), row.count.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Intersection counts against `u*_μ` on `(0, ρ)` for each `ζ` in the grid (in parallel).
pub fn intersection_growth(
    spec: &ProblemSpec,
    zeta_grid: &[f64],
    rho: f64,
    opts: &SolverOptions,
) -> Result<GrowthTable> {
    let star = singular_extend(spec, rho * 1.01, opts)?;
    if let Some(r0) = star.first_zero() {
        return Err(Error::Positivity { r0 });
    }
    let tab = spec.table();
    let sigma = if require_oscillatory(spec).is_ok() {
        sigma_sequence(spec.n, spec.p, tab_alpha(spec), tab.k0, 3, opts).unwrap_or_default()
    } else {
        vec![]
    };
    let theta = tab.theta;
    let rows = zeta_grid
        .par_iter()
        .map(|&zeta| {
            let rep = count_against_singular(spec, &star, zeta, rho, opts)?;
            let scale = zeta.powf(1.0 / theta);
            let scaled: Vec<f64> = rep.crossings.iter().take(3).map(|r| r * scale).collect();
            let location_error = (sigma.len() >= 3 && scaled.len() >= 3)
                .then(|| scaled.iter().zip(&sigma).map(|(s, g)| (s / g - 1.0).abs()).fold(0.0, f64::max));
            Ok(GrowthRow { zeta, count: rep.count, crossings: rep.crossings, scaled, location_error })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<&GrowthRow> = rows.iter().collect();
    order.sort_by(|a, b| a.zeta.total_cmp(&b.zeta));
    let nondecreasing = order.windows(2).all(|w| w[1].count >= w[0].count);
    Ok(GrowthTable { rho, rows, nondecreasing, sigma })
}

fn tab_alpha(spec: &ProblemSpec) -> f64 {
    spec.k.alpha()
}
