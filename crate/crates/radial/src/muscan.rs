//! Classification of `μ` by the behaviour of the singular solution `u*_μ`, the threshold `μ₁`,
//! fast-decay roots of the mismatch `H`, and the bounded-solution census.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farfield::{eta_limit, mismatch_h, EtaLimit, MatchingFunctions, DEFAULT_R1};
use crate::intersection::count_against_singular;
use crate::profiles::ProblemSpec;
use crate::shooting::{regular_solve, SolverOptions, Termination};
use crate::singular::{singular_extend, SingularSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanOptions {
    pub solver: SolverOptions,
    /// Matching radius `R₁` (start value when auto-selected).
    pub r1: f64,
    /// Radius to which `u*_μ` is followed when classifying.
    pub r_far: f64,
    /// Radius of the cheap positivity probe that sets `μ_max`.
    pub probe_radius: f64,
    /// Target width of the `μ₁` bracket.
    pub mu_tol: f64,
    /// `|H| ≤ h_threshold (|u*'(R₁)| + (N−2)(u*(R₁) + γR₁^{-θ})/R₁)` counts as a fast-decay match.
    pub h_threshold: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            r1: DEFAULT_R1,
            r_far: 1e6,
            probe_radius: 10.0,
            mu_tol: 1e-3,
            h_threshold: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuClass {
    FastDecay { eta: f64 },
    SlowDecay,
    PositivityFailure { r0: f64 },
    Undetermined { reason: String },
}

impl MuClass {
    pub fn label(&self) -> &'static str {
        match self {
            MuClass::FastDecay { .. } => "fast_decay",
            MuClass::SlowDecay => "slow_decay",
            MuClass::PositivityFailure { .. } => "positivity_failure",
            MuClass::Undetermined { .. } => "undetermined",
        }
    }

    pub fn is_slow(&self) -> bool {
        matches!(self, MuClass::SlowDecay)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuClassification {
    pub mu: f64,
    pub class: MuClass,
    /// `H(μ)` when matching functions were supplied and the far-field solve succeeded.
    pub h: Option<f64>,
    /// `r^{θ̃} u*` at the far radius for slow decay.
    pub weighted_limit: Option<f64>,
    /// Decay exponent of the observed tail.
    pub tail_exponent: Option<f64>,
}

/// Derivative scale for `H`: `|u'| + (N−2)(|u| + γ r^{-θ})/r`. The `γ r^{-θ}` term keeps the
/// scale at the size of `u*` before cancellation when `u*(R₁)` is nearly zero.
fn h_scale(spec: &ProblemSpec, u: f64, du: f64, r1: f64) -> f64 {
    let tab = spec.table();
    du.abs() + (spec.nf() - 2.0) * (u.abs() + tab.gamma * r1.powf(-tab.theta)) / r1
}

/// Classifies `μ` from `u*_μ` followed to `opts.r_far`.
///
/// Order of tests: failure before `R₁`; a fast-decay match `|H| ≤ threshold` (when `matching`
/// is given); failure before `r_far`; the slow-decay tail test; the two-way `η` estimate.
pub fn classify_mu(
    spec: &ProblemSpec,
    mu: f64,
    matching: Option<&MatchingFunctions>,
    opts: &ScanOptions,
) -> Result<MuClassification> {
    if !(mu >= 0.0) {
        return Err(Error::domain(format!("mu = {mu} must be nonnegative")));
    }
    let s = spec.with_mu(mu);
    let star = singular_extend(&s, opts.r_far, &opts.solver)?;
    let r1 = matching.map_or(opts.r1, |m| m.r1);
    let tab = s.table();
    let mut out =
        MuClassification { mu, class: MuClass::SlowDecay, h: None, weighted_limit: None, tail_exponent: None };
    if let Some(r0) = star.first_zero().filter(|&r0| r0 <= r1) {
        out.class = MuClass::PositivityFailure { r0 };
        return Ok(out);
    }
    if let Some(m) = matching {
        let widened = star.eval(m.r1).map(|(u, _)| m.widened_to(u));
        if let Ok(mm) = mismatch_h(widened.as_ref().unwrap_or(m), &star) {
            out.h = Some(mm.h);
            if mm.h.abs() <= opts.h_threshold * h_scale(&s, mm.u_r1, mm.du_r1, m.r1) {
                out.class = MuClass::FastDecay { eta: mm.eta };
                out.tail_exponent = Some(s.nf() - 2.0);
                return Ok(out);
            }
        }
    }
    if let Some(r0) = star.first_zero() {
        out.class = MuClass::PositivityFailure { r0 };
        return Ok(out);
    }
    match eta_limit(&star.solution, r1)? {
        EtaLimit::SlowDecayDetected { weighted_limit } => {
            out.weighted_limit = Some(weighted_limit);
            out.tail_exponent = Some(tab.theta_tilde);
        }
        EtaLimit::Fast { eta, .. } => {
            out.class = MuClass::FastDecay { eta };
            out.tail_exponent = Some(s.nf() - 2.0);
        }
        EtaLimit::Undetermined { direct, formula } => {
            out.class = MuClass::Undetermined {
                reason: format!("tail tests disagree: direct eta {direct:.6e}, formula eta {formula:.6e}"),
            };
        }
    }
    Ok(out)
}

/// Smallest `μ = 2^k` (k ≥ 0) whose singular solution vanishes before `opts.probe_radius`.
pub fn positivity_probe(spec: &ProblemSpec, opts: &ScanOptions) -> Result<f64> {
    let mut mu = 1.0;
    for _ in 0..80 {
        let star = singular_extend(&spec.with_mu(mu), opts.probe_radius, &opts.solver)?;
        if star.first_zero().is_some() {
            return Ok(mu);
        }
        mu *= 2.0;
    }
    Err(Error::NotBracketed("no positivity failure below mu = 2^80".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mu1 {
    pub lo: f64,
    pub hi: f64,
    pub class_lo: MuClass,
    pub class_hi: MuClass,
}

/// Brackets the end of the slow-decay range `[0, μ₁)` to width `opts.mu_tol`.
///
/// `mu_max` caps the doubling search.
pub fn find_mu1(spec: &ProblemSpec, mu_max: f64, opts: &ScanOptions) -> Result<Mu1> {
    let classify = |mu: f64| classify_mu(spec, mu, None, opts).map(|c| c.class);
    let c0 = classify(0.0)?;
    if !c0.is_slow() {
        return Err(Error::Regime(format!("mu = 0 is not slow decay ({})", c0.label())));
    }
    let (mut lo, mut class_lo) = (0.0, c0);
    let mut hi = 1.0f64.min(mu_max);
    let mut class_hi = classify(hi)?;
    while class_hi.is_slow() {
        if hi >= mu_max {
            return Err(Error::NotBracketed(format!("slow decay persists up to mu_max = {mu_max}")));
        }
        (lo, class_lo) = (hi, class_hi);
        hi = (2.0 * hi).min(mu_max);
        class_hi = classify(hi)?;
    }
    while hi - lo > opts.mu_tol {
        let mid = 0.5 * (lo + hi);
        let c = classify(mid)?;
        if c.is_slow() {
            (lo, class_lo) = (mid, c);
        } else {
            (hi, class_hi) = (mid, c);
        }
    }
    Ok(Mu1 { lo, hi, class_lo, class_hi })
}

/// Matching functions whose window is `[½ min, 2 max]` of `R₁^{N−2} u*_μ(R₁)` over `mus`,
/// with `R₁` auto-selected (and the window recomputed when `R₁` moves).
pub fn matching_for_range(spec: &ProblemSpec, mus: &[f64], opts: &ScanOptions) -> Result<MatchingFunctions> {
    let mut r1 = opts.r1;
    let top = mus.iter().cloned().fold(0.0, f64::max);
    for _ in 0..8 {
        let phis: Vec<f64> = mus
            .par_iter()
            .map(|&mu| -> Result<Option<f64>> {
                let star = singular_extend(&spec.with_mu(mu), r1 * 1.001, &opts.solver)?;
                if star.first_zero().is_some() {
                    return Ok(None);
                }
                Ok(star.eval(r1).map(|(u, _)| u * r1.powf(spec.nf() - 2.0)))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .filter(|p| *p > 0.0)
            .collect();
        if phis.is_empty() {
            return Err(Error::Positivity { r0: r1 });
        }
        let lo = phis.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = phis.iter().cloned().fold(0.0, f64::max);
        let m = MatchingFunctions::new(&spec.with_mu(top), r1, (0.5 * lo, 2.0 * hi))?;
        if m.r1 == r1 {
            return Ok(m);
        }
        r1 = m.r1;
    }
    Err(Error::Budget("matching radius did not settle".into()))
}

/// Sign of `H(μ)` (0 within the fast-decay threshold). When `u*_μ(R₁)` leaves the window the
/// window is widened at the same `R₁`; if that solve fails, the sign is extended by `−` below
/// the window and `+` above it. Failure of `u*_μ` before `R₁` also counts as `−`.
fn extended_h(m: &MatchingFunctions, mu: f64, opts: &ScanOptions) -> Result<(f64, Option<f64>)> {
    let spec = m.spec.with_mu(mu);
    let star = singular_extend(&spec, m.r1 * 1.001, &opts.solver)?;
    if star.first_zero().is_some() {
        return Ok((-1.0, None));
    }
    let (u, du) = star.eval(m.r1).ok_or(Error::Coverage { lo: m.r1, hi: m.r1 })?;
    let (lo, hi) = m.xi_domain();
    let h = if u > lo && u < hi {
        mismatch_h(m, &star)?
    } else {
        match mismatch_h(&m.widened_to(u), &star) {
            Ok(h) => h,
            Err(_) => return Ok((if u <= lo { -1.0 } else { 1.0 }, None)),
        }
    };
    let signed = if h.h.abs() <= opts.h_threshold * h_scale(&spec, u, du, m.r1) { 0.0 } else { h.h.signum() };
    Ok((signed, Some(h.h)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastRoots {
    pub roots: Vec<(f64, f64)>,
    /// Grid points where `H` could not be evaluated, with the reason.
    pub skipped: Vec<(f64, String)>,
    pub r1: f64,
    pub eta_window: (f64, f64),
}

/// Brackets sign changes of `H` on a uniform grid of `grid_n` points over `mu_range` and bisects
/// each until `H` is within the fast-decay threshold at the bracket midpoint.
pub fn find_fast_roots(
    spec: &ProblemSpec,
    mu_range: (f64, f64),
    grid_n: usize,
    opts: &ScanOptions,
) -> Result<FastRoots> {
    let (a, b) = mu_range;
    if !(b > a) || grid_n < 2 {
        return Err(Error::domain("mu range needs b > a and at least 2 grid points"));
    }
    let mus: Vec<f64> = (0..grid_n).map(|i| a + (b - a) * i as f64 / (grid_n - 1) as f64).collect();
    let m = matching_for_range(spec, &mus, opts)?;
    find_fast_roots_with(&m, &mus, opts)
}

/// [`find_fast_roots`] with given matching functions and grid.
pub fn find_fast_roots_with(m: &MatchingFunctions, mus: &[f64], opts: &ScanOptions) -> Result<FastRoots> {
    let evals: Vec<(f64, std::result::Result<f64, String>)> =
        mus.par_iter().map(|&mu| (mu, extended_h(m, mu, opts).map(|v| v.0).map_err(|e| e.to_string()))).collect();
    let mut skipped = Vec::new();
    let mut good: Vec<(f64, f64)> = Vec::new();
    for (mu, r) in evals {
        match r {
            Ok(s) => good.push((mu, s)),
            Err(e) => skipped.push((mu, e)),
        }
    }
    let mut roots = Vec::new();
    let mut i = 0;
    while i < good.len() {
        let (mu, s) = good[i];
        if s == 0.0 {
            roots.push((mu, mu));
            i += 1;
            continue;
        }
        if let Some(&(mu2, s2)) = good.get(i + 1) {
            if s2 != 0.0 && s2 != s {
                roots.push(refine_root(m, mu, s, mu2, opts)?);
            }
        }
        i += 1;
    }
    Ok(FastRoots { roots, skipped, r1: m.r1, eta_window: m.eta_window })
}

fn refine_root(m: &MatchingFunctions, mut lo: f64, s_lo: f64, mut hi: f64, opts: &ScanOptions) -> Result<(f64, f64)> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (s, _) = extended_h(m, mid, opts)?;
        if s == 0.0 {
            return Ok((lo, hi));
        }
        if s == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuScanReport {
    pub spec: ProblemSpec,
    /// First `2^k` with failure before the probe radius.
    pub probe: f64,
    pub mu_max: f64,
    pub grid: Vec<MuClassification>,
    pub mu1_estimate: Option<(f64, f64)>,
    pub fast_roots: Vec<(f64, f64)>,
    /// Grid neighbours around the first `μ` after which every grid point fails positivity.
    pub mu_star_bracket: Option<(f64, f64)>,
    pub r1: f64,
    pub eta_window: (f64, f64),
    pub notes: Vec<String>,
}

impl MuScanReport {
    /// Rows `mu,class,eta,r0,H` (NaN where not applicable).
    pub fn write_classes_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["mu", "class", "eta", "r0", "H"])?;
        let nan = f64::NAN;
        for c in &self.grid {
            let (eta, r0) = match c.class {
                MuClass::FastDecay { eta } => (eta, nan),
                MuClass::PositivityFailure { r0 } => (nan, r0),
                _ => (nan, nan),
            };
            out.write_record([
                format!("{:e}", c.mu),
                c.class.label().to_string(),
                format!("{eta:e}"),
                format!("{r0:e}"),
                format!("{:e}", c.h.unwrap_or(nan)),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Full scan: probe `μ_max`, classify a uniform grid of `grid_n` points on `[0, μ_max]`,
/// locate `μ₁` and the fast-decay roots.
pub fn scan_mu(spec: &ProblemSpec, grid_n: usize, opts: &ScanOptions) -> Result<MuScanReport> {
    let probe = positivity_probe(spec, opts)?;
    let mu_max = 2.0 * probe;
    let n = grid_n.max(2);
    let mus: Vec<f64> = (0..n).map(|i| mu_max * i as f64 / (n - 1) as f64).collect();
    let mut notes = Vec::new();
    let matching = match matching_for_range(spec, &mus, opts) {
        Ok(m) => Some(m),
        Err(e) => {
            notes.push(format!("matching functions unavailable: {e}"));
            None
        }
    };
    let grid = mus.par_iter().map(|&mu| classify_mu(spec, mu, matching.as_ref(), opts)).collect::<Result<Vec<_>>>()?;
    let mu1_estimate = match find_mu1(spec, mu_max, opts) {
        Ok(m) => Some((m.lo, m.hi)),
        Err(e) => {
            notes.push(format!("mu1 not located: {e}"));
            None
        }
    };
    let (fast_roots, r1, eta_window) = match &matching {
        Some(m) => {
            let fr = find_fast_roots_with(m, &mus, opts)?;
            for (mu, why) in &fr.skipped {
                notes.push(format!("H skipped at mu = {mu:e}: {why}"));
            }
            (fr.roots, m.r1, m.eta_window)
        }
        None => (vec![], opts.r1, (f64::NAN, f64::NAN)),
    };
    let fails = |c: &MuClassification| matches!(c.class, MuClass::PositivityFailure { .. });
    let first_persistent = grid.iter().rposition(|c| !fails(c)).map_or(0, |i| i + 1);
    let mu_star_bracket = (first_persistent < grid.len() && first_persistent > 0)
        .then(|| (grid[first_persistent - 1].mu, grid[first_persistent].mu));
    Ok(MuScanReport {
        spec: spec.clone(),
        probe,
        mu_max,
        grid,
        mu1_estimate,
        fast_roots,
        mu_star_bracket,
        r1,
        eta_window,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailClass {
    /// `r^{θ̃} u` settles within 1% over the last decade.
    SlowLike,
    /// `r^{N−2} u` settles within 1% over the last decade.
    FastLike,
    Unsettled,
    Fails {
        r0: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub zeta: f64,
    pub positive_to_budget: bool,
    pub tail: TailClass,
    /// `Z_(0,ρ)[u(·, ζ) − u*]`.
    pub count: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Increment {
    pub zeta_lo: f64,
    pub zeta_hi: f64,
    pub count_lo: usize,
    pub count_hi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub mu: f64,
    pub rho: f64,
    pub r_budget: f64,
    pub rows: Vec<CensusRow>,
    /// Consecutive `ζ` pairs across which the count increases.
    pub increments: Vec<Increment>,
}

fn tail_class(spec: &ProblemSpec, zeta: f64, r_budget: f64, opts: &SolverOptions) -> Result<(bool, TailClass)> {
    let sol = regular_solve(spec, zeta, r_budget, &SolverOptions { stop_at_zero: true, ..*opts })?;
    match sol.termination {
        Termination::HitZero { r0 } => return Ok((false, TailClass::Fails { r0 })),
        Termination::ReachedRmax => {}
        t => return Err(t.failure().expect("abnormal termination")),
    }
    let settled = |k: f64| -> Option<bool> {
        let (a, _) = sol.eval(r_budget / 10.0)?;
        let (b, _) = sol.eval(r_budget)?;
        let ratio = (b * r_budget.powf(k)) / (a * (r_budget / 10.0).powf(k));
        Some((ratio - 1.0).abs() < 0.01)
    };
    let tab = spec.table();
    let class = if settled(tab.theta_tilde) == Some(true) {
        TailClass::SlowLike
    } else if settled(spec.nf() - 2.0) == Some(true) {
        TailClass::FastLike
    } else {
        TailClass::Unsettled
    };
    Ok((true, class))
}

/// For each `ζ`: positivity up to `r_budget` with the tail class, and the intersection count
/// with `u*_μ` on `(0, ρ)`. Requires `u*_μ` positive on `(0, ρ]`.
pub fn bounded_solution_census(
    spec: &ProblemSpec,
    zeta_grid: &[f64],
    r_budget: f64,
    rho: f64,
    opts: &SolverOptions,
) -> Result<CensusReport> {
    let mut rows = Vec::with_capacity(zeta_grid.len());
    if !zeta_grid.is_empty() {
        let star: SingularSolution = singular_extend(spec, rho * 1.01, opts)?;
        if let Some(r0) = star.first_zero() {
            return Err(Error::Positivity { r0 });
        }
        rows = zeta_grid
            .par_iter()
            .map(|&zeta| {
                let count = count_against_singular(spec, &star, zeta, rho, opts);
                let tail = tail_class(spec, zeta, r_budget, opts);
                match (count, tail) {
                    (Ok(c), Ok((pos, tail))) => {
                        CensusRow { zeta, positive_to_budget: pos, tail, count: c.count, error: None }
                    }
                    (c, t) => CensusRow {
                        zeta,
                        positive_to_budget: false,
                        tail: TailClass::Unsettled,
                        count: c.as_ref().map_or(0, |c| c.count),
                        error: Some(c.err().or(t.err()).map(|e| e.to_string()).unwrap_or_default()),
                    },
                }
            })
            .collect();
    }
    let increments = rows
        .windows(2)
        .filter(|w| w[0].error.is_none() && w[1].error.is_none() && w[1].count > w[0].count)
        .map(|w| Increment { zeta_lo: w[0].zeta, zeta_hi: w[1].zeta, count_lo: w[0].count, count_hi: w[1].count })
        .collect();
    Ok(CensusReport { mu: spec.mu, rho, r_budget, rows, increments })
}

/// `n` log-uniform points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{CoefficientProfile, ForcingProfile};

    fn forced(amplitude: f64) -> ProblemSpec {
        ProblemSpec::new(
            13,
            2.0,
            CoefficientProfile::PurePower { alpha: 0.0, k0: 1.0 },
            ForcingProfile::PowerDecayBump { nu: 0.0, q: 14.0, amplitude },
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn homogeneous_is_slow() {
        let spec = ProblemSpec::homogeneous(13, 2.0, 0.0, 1.0).unwrap();
        let c = classify_mu(&spec, 0.0, None, &ScanOptions::default()).unwrap();
        assert_eq!(c.class, MuClass::SlowDecay);
        assert!((c.weighted_limit.unwrap() / 18.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn small_mu_slow_large_mu_fails() {
        let spec = forced(1.0);
        let opts = ScanOptions::default();
        assert!(classify_mu(&spec, 10.0, None, &opts).unwrap().class.is_slow());
        let probe = positivity_probe(&spec, &opts).unwrap();
        assert_eq!(probe, 16384.0);
        let c = classify_mu(&spec, 2.0 * probe, None, &opts).unwrap();
        assert!(matches!(c.class, MuClass::PositivityFailure { .. }));
    }

    #[test]
    fn mu1_located_and_scale_covariant() {
        let opts = ScanOptions { mu_tol: 1e-2, ..ScanOptions::default() };
        let a = find_mu1(&forced(1.0), 32768.0, &opts).unwrap();
        assert!(a.hi - a.lo <= 1e-2);
        assert!(a.lo > 12823.0 && a.hi < 12823.2, "{a:?}");
        let b = find_mu1(&forced(2.0), 32768.0, &opts).unwrap();
        assert!((2.0 * b.lo - a.lo).abs() < 3e-2);
    }

    #[test]
    fn fast_root_near_mu1() {
        let spec = forced(1.0);
        let opts = ScanOptions::default();
        let fr = find_fast_roots(&spec, (12000.0, 14000.0), 5, &opts).unwrap();
        assert_eq!(fr.roots.len(), 1, "{fr:?}");
        let (lo, hi) = fr.roots[0];
        assert!(lo > 12823.0 && hi < 12823.2, "{lo} {hi}");
        let m = crate::farfield::MatchingFunctions::at_radius(&spec.with_mu(14000.0), fr.r1, fr.eta_window);
        let c = classify_mu(&spec, 0.5 * (lo + hi), Some(&m), &opts).unwrap();
        assert!(matches!(c.class, MuClass::FastDecay { .. }), "{c:?}");
    }

    #[test]
    fn census_empty_and_above_jl() {
        let spec = ProblemSpec::homogeneous(13, 4.0, 0.0, 1.0).unwrap();
        let opts = SolverOptions::default();
        let empty = bounded_solution_census(&spec, &[], 1e4, 1.0, &opts).unwrap();
        assert!(empty.rows.is_empty());
        let rep = bounded_solution_census(&spec, &log_grid(10.0, 1e6, 25), 1e4, 1.0, &opts).unwrap();
        assert!(rep.increments.is_empty());
        assert!(rep.rows.iter().all(|r| r.positive_to_budget));
    }

    #[test]
    fn census_below_jl_counts_increments() {
        let spec = forced(1.0).with_mu(12823.12 / 2.0);
        let rep =
            bounded_solution_census(&spec, &log_grid(10.0, 1e6, 41), 1e4, 1.0, &SolverOptions::default()).unwrap();
        assert!(rep.increments.len() >= 3, "{:?}", rep.increments);
        assert!(rep.rows.iter().all(|r| r.error.is_none()));
    }
}
