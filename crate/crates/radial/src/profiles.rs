//! Coefficient profiles `K`, forcing profiles `f` and the problem bundle.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{build_exponent_table, validate_regime, ExponentTable, RegimeReport};
use crate::quadrature::{integrate, integrate_tail, QuadOptions};

/// `K(r) > 0` with `K ~ k₀ r^α` at 0 and `K ~ k_∞ r^β` at ∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientProfile {
    PurePower {
        alpha: f64,
        k0: f64,
    },
    /// `k₀ r^α (1 − s) + k_∞ r^β s` with `s(r) = 1 / (1 + (R/r)⁴)`.
    BlendedPower {
        alpha: f64,
        k0: f64,
        beta: f64,
        k_inf: f64,
        blend_radius: f64,
    },
    /// Log-log interpolation of samples, power-law extrapolation outside.
    Tabulated {
        alpha: f64,
        k0: f64,
        beta: f64,
        k_inf: f64,
        r: Vec<f64>,
        values: Vec<f64>,
    },
}

/// `f(r) ≥ 0` with `f = O(r^ν)` at 0 and `f = O(r^{-q})` at ∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingProfile {
    Zero,
    /// `amplitude · r^ν (1 + r²)^{-(q+ν)/2}`.
    PowerDecayBump {
        nu: f64,
        q: f64,
        amplitude: f64,
    },
    /// `amplitude · exp(1 − 1/(1 − x²))` with `x` mapping `[r1, r2]` onto `[-1, 1]`.
    CompactBump {
        r1: f64,
        r2: f64,
        amplitude: f64,
    },
    /// Interpolated samples; extrapolated as `r^ν` below and `r^{-q}` above the table.
    Tabulated {
        nu: f64,
        q: f64,
        r: Vec<f64>,
        values: Vec<f64>,
    },
}

fn interp_loglog(r: &[f64], v: &[f64], x: f64) -> f64 {
    let i = r.partition_point(|&ri| ri <= x).clamp(1, r.len() - 1);
    let (r0, r1, v0, v1) = (r[i - 1], r[i], v[i - 1], v[i]);
    let s = (x / r0).ln() / (r1 / r0).ln();
    if v0 > 0.0 && v1 > 0.0 {
        (v0.ln() + s * (v1 / v0).ln()).exp()
    } else {
        v0 + s * (v1 - v0)
    }
}

fn check_table(r: &[f64], v: &[f64], allow_zero: bool) -> Result<()> {
    if r.len() < 2 || r.len() != v.len() {
        return Err(Error::Table("a table needs at least two (r, value) rows".into()));
    }
    if !(r[0] > 0.0) || r.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Table("r must be positive and strictly increasing".into()));
    }
    let bad = v.iter().position(|&x| !x.is_finite() || x < 0.0 || (!allow_zero && x == 0.0));
    if let Some(i) = bad {
        return Err(Error::Table(format!("invalid value {} at row {}", v[i], i + 1)));
    }
    Ok(())
}

/// Reads a two-column `(r, value)` CSV; a non-numeric first row is treated as a header.
pub fn read_table<R: Read>(reader: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let (mut r, mut v) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Table(format!("row {} has {} columns, expected 2", i + 1, rec.len())));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                r.push(a);
                v.push(b);
            }
            _ if i == 0 => continue,
            _ => return Err(Error::Table(format!("row {} is not numeric", i + 1))),
        }
    }
    Ok((r, v))
}

impl CoefficientProfile {
    pub fn tabulated_from_csv<R: Read>(reader: R, alpha: f64, k0: f64, beta: f64, k_inf: f64) -> Result<Self> {
        let (r, values) = read_table(reader)?;
        let p = CoefficientProfile::Tabulated { alpha, k0, beta, k_inf, r, values };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, e) in [("alpha", self.alpha()), ("beta", self.beta())] {
            if !(e > -2.0) || !e.is_finite() {
                return Err(Error::domain(format!("{name} = {e} must exceed -2")));
            }
        }
        if !(self.k0() > 0.0) || !(self.k_inf() > 0.0) || !self.k0().is_finite() {
            return Err(Error::domain("k0 and k_inf must be positive"));
        }
        match self {
            CoefficientProfile::BlendedPower { blend_radius, .. } if !(*blend_radius > 0.0) => {
                Err(Error::domain("blend_radius must be positive"))
            }
            CoefficientProfile::Tabulated { r, values, .. } => check_table(r, values, false),
            _ => Ok(()),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            CoefficientProfile::PurePower { alpha, .. }
            | CoefficientProfile::BlendedPower { alpha, .. }
            | CoefficientProfile::Tabulated { alpha, .. } => *alpha,
        }
    }

    pub fn k0(&self) -> f64 {
        match self {
            CoefficientProfile::PurePower { k0, .. }
            | CoefficientProfile::BlendedPower { k0, .. }
            | CoefficientProfile::Tabulated { k0, .. } => *k0,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            CoefficientProfile::PurePower { alpha, .. } => *alpha,
            CoefficientProfile::BlendedPower { beta, .. } | CoefficientProfile::Tabulated { beta, .. } => *beta,
        }
    }

    pub fn k_inf(&self) -> f64 {
        match self {
            CoefficientProfile::PurePower { k0, .. } => *k0,
            CoefficientProfile::BlendedPower { k_inf, .. } | CoefficientProfile::Tabulated { k_inf, .. } => *k_inf,
        }
    }

    /// Radius below which the profile is close to its origin asymptote.
    pub fn inner_scale(&self) -> f64 {
        match self {
            CoefficientProfile::PurePower { .. } => 1.0,
            CoefficientProfile::BlendedPower { blend_radius, .. } => *blend_radius,
            CoefficientProfile::Tabulated { r, .. } => r[0],
        }
    }

    /// Radius above which the profile is close to its far asymptote.
    pub fn outer_scale(&self) -> f64 {
        match self {
            CoefficientProfile::PurePower { .. } => 1.0,
            CoefficientProfile::BlendedPower { blend_radius, .. } => *blend_radius,
            CoefficientProfile::Tabulated { r, .. } => r[r.len() - 1],
        }
    }

    /// `K(r)`; the caller guarantees `r > 0`.
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            CoefficientProfile::PurePower { alpha, k0 } => k0 * r.powf(*alpha),
            CoefficientProfile::BlendedPower { alpha, k0, beta, k_inf, blend_radius } => {
                let s = 1.0 / (1.0 + (blend_radius / r).powi(4));
                k0 * r.powf(*alpha) * (1.0 - s) + k_inf * r.powf(*beta) * s
            }
            CoefficientProfile::Tabulated { alpha, beta, r: rs, values, .. } => {
                let n = rs.len();
                if r < rs[0] {
                    values[0] * (r / rs[0]).powf(*alpha)
                } else if r > rs[n - 1] {
                    values[n - 1] * (r / rs[n - 1]).powf(*beta)
                } else {
                    interp_loglog(rs, values, r)
                }
            }
        }
    }

    /// `e^{-wt} K(e^t)`, exact for pure powers when `w = α`.
    pub fn scaled(&self, t: f64, w: f64) -> f64 {
        match self {
            CoefficientProfile::PurePower { alpha, k0 } if *alpha == w => *k0,
            _ => (-w * t).exp() * self.eval(t.exp()),
        }
    }
}

impl ForcingProfile {
    pub fn tabulated_from_csv<R: Read>(reader: R, nu: f64, q: f64) -> Result<Self> {
        let (r, values) = read_table(reader)?;
        let f = ForcingProfile::Tabulated { nu, q, r, values };
        f.validate_shape()?;
        Ok(f)
    }

    fn validate_shape(&self) -> Result<()> {
        match self {
            ForcingProfile::Zero => Ok(()),
            ForcingProfile::PowerDecayBump { nu, q, amplitude } => {
                if !(*nu > -2.0) || !q.is_finite() || !(*amplitude >= 0.0) {
                    return Err(Error::domain("power_decay_bump needs nu > -2, finite q, amplitude >= 0"));
                }
                Ok(())
            }
            ForcingProfile::CompactBump { r1, r2, amplitude } => {
                if !(*r1 >= 0.0 && r2 > r1) || !(*amplitude >= 0.0) {
                    return Err(Error::domain("compact_bump needs 0 <= r1 < r2 and amplitude >= 0"));
                }
                Ok(())
            }
            ForcingProfile::Tabulated { nu, r, values, .. } => {
                if !(*nu > -2.0) {
                    return Err(Error::domain("nu must exceed -2"));
                }
                check_table(r, values, true)
            }
        }
    }

    /// Checks the shape parameters and the decay condition `q > N`.
    pub fn validate(&self, n: u32) -> Result<()> {
        self.validate_shape()?;
        match self.q() {
            Some(q) if !(q > n as f64) => Err(Error::domain(format!("decay exponent q = {q} must exceed N = {n}"))),
            _ => Ok(()),
        }
    }

    /// Growth exponent at the origin.
    pub fn nu(&self) -> f64 {
        match self {
            ForcingProfile::PowerDecayBump { nu, .. } | ForcingProfile::Tabulated { nu, .. } => *nu,
            _ => 0.0,
        }
    }

    /// Decay exponent at infinity, if the profile is not compactly supported.
    pub fn q(&self) -> Option<f64> {
        match self {
            ForcingProfile::PowerDecayBump { q, .. } | ForcingProfile::Tabulated { q, .. } => Some(*q),
            _ => None,
        }
    }

    /// Leading coefficient `f₀` in `f(r) ≈ f₀ r^ν` as `r → 0`.
    pub fn f0(&self) -> f64 {
        match self {
            ForcingProfile::PowerDecayBump { amplitude, .. } => *amplitude,
            ForcingProfile::Tabulated { nu, r, values, .. } => values[0] * r[0].powf(-nu),
            ForcingProfile::Zero | ForcingProfile::CompactBump { .. } => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ForcingProfile::Zero => true,
            ForcingProfile::PowerDecayBump { amplitude, .. } | ForcingProfile::CompactBump { amplitude, .. } => {
                *amplitude == 0.0
            }
            ForcingProfile::Tabulated { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }

    /// Radius below which the origin asymptote is accurate.
    pub fn inner_scale(&self) -> f64 {
        match self {
            ForcingProfile::Zero | ForcingProfile::PowerDecayBump { .. } => 1.0,
            ForcingProfile::CompactBump { r1, r2, .. } => {
                if *r1 > 0.0 {
                    *r1
                } else {
                    *r2
                }
            }
            ForcingProfile::Tabulated { r, .. } => r[0],
        }
    }

    /// `f(r)`; the caller guarantees `r > 0`.
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            ForcingProfile::Zero => 0.0,
            ForcingProfile::PowerDecayBump { nu, q, amplitude } => {
                amplitude * r.powf(*nu) * (1.0 + r * r).powf(-(q + nu) / 2.0)
            }
            ForcingProfile::CompactBump { r1, r2, amplitude } => {
                if r <= *r1 || r >= *r2 {
                    return 0.0;
                }
                let x = (2.0 * r - r1 - r2) / (r2 - r1);
                amplitude * (1.0 - 1.0 / (1.0 - x * x)).exp()
            }
            ForcingProfile::Tabulated { nu, q, r: rs, values } => {
                let n = rs.len();
                if r < rs[0] {
                    values[0] * (r / rs[0]).powf(*nu)
                } else if r > rs[n - 1] {
                    values[n - 1] * (r / rs[n - 1]).powf(-q)
                } else {
                    interp_loglog(rs, values, r)
                }
            }
        }
    }

    /// `e^{wt} f(e^t)`.
    pub fn scaled(&self, t: f64, w: f64) -> f64 {
        match self {
            ForcingProfile::Zero => 0.0,
            _ => {
                let v = self.eval(t.exp());
                if v == 0.0 {
                    0.0
                } else {
                    (w * t).exp() * v
                }
            }
        }
    }
}

/// Checked `K(r)`.
#[allow(non_snake_case)]
pub fn eval_K(profile: &CoefficientProfile, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("radius {r} must be positive")));
    }
    Ok(profile.eval(r))
}

/// Checked `f(r)`.
pub fn eval_f(profile: &ForcingProfile, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("radius {r} must be positive")));
    }
    Ok(profile.eval(r))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    n: u32,
    p: f64,
    k: CoefficientProfile,
    f: ForcingProfile,
    #[serde(default)]
    mu: f64,
}

/// Everything that defines one instance of the radial equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ProblemSpec {
    pub n: u32,
    pub p: f64,
    pub k: CoefficientProfile,
    pub f: ForcingProfile,
    pub mu: f64,
    table: ExponentTable,
    regime: RegimeReport,
}

impl TryFrom<RawSpec> for ProblemSpec {
    type Error = Error;
    fn try_from(raw: RawSpec) -> Result<Self> {
        ProblemSpec::new(raw.n, raw.p, raw.k, raw.f, raw.mu)
    }
}

impl From<ProblemSpec> for RawSpec {
    fn from(s: ProblemSpec) -> Self {
        RawSpec { n: s.n, p: s.p, k: s.k, f: s.f, mu: s.mu }
    }
}

impl ProblemSpec {
    pub fn new(n: u32, p: f64, k: CoefficientProfile, f: ForcingProfile, mu: f64) -> Result<Self> {
        k.validate()?;
        f.validate(n)?;
        if !mu.is_finite() {
            return Err(Error::domain("mu must be finite"));
        }
        let table = build_exponent_table(n, p, k.alpha(), k.beta(), k.k0(), k.k_inf())?;
        let regime = validate_regime(&table);
        Ok(Self { n, p, k, f, mu, table, regime })
    }

    /// `K(r) = k₀ r^α`, `μ = 0`.
    pub fn homogeneous(n: u32, p: f64, alpha: f64, k0: f64) -> Result<Self> {
        Self::new(n, p, CoefficientProfile::PurePower { alpha, k0 }, ForcingProfile::Zero, 0.0)
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }

    pub fn table(&self) -> &ExponentTable {
        &self.table
    }

    pub fn regime(&self) -> RegimeReport {
        self.regime
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `true` when `K` is a pure power and `μ f ≡ 0`.
    pub fn is_homogeneous(&self) -> bool {
        matches!(self.k, CoefficientProfile::PurePower { .. }) && (self.mu == 0.0 || self.f.is_zero())
    }

    /// Right-hand side source `K(r) max(u,0)^p + μ f(r)`.
    pub fn source(&self, r: f64, u: f64) -> f64 {
        let nl = if u > 0.0 { self.k.eval(r) * u.powf(self.p) } else { 0.0 };
        if self.mu == 0.0 {
            nl
        } else {
            nl + self.mu * self.f.eval(r)
        }
    }
}

/// `(L(t), g(t)) = (e^{-αt} K(e^t), e^{(2+θ)t} f(e^t))`.
pub fn emden_fowler_coeffs(spec: &ProblemSpec, t: f64) -> (f64, f64) {
    let tab = spec.table();
    (spec.k.scaled(t, tab.alpha), spec.f.scaled(t, 2.0 + tab.theta))
}

/// Far-field analogue `(e^{-βt} K(e^t), e^{(2+θ̃)t} f(e^t))`.
pub fn far_field_coeffs(spec: &ProblemSpec, t: f64) -> (f64, f64) {
    let tab = spec.table();
    (spec.k.scaled(t, tab.beta), spec.f.scaled(t, 2.0 + tab.theta_tilde))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub measured_alpha: f64,
    pub measured_k0: f64,
    pub measured_beta: f64,
    pub measured_k_inf: f64,
    /// Log-log slope of `f` near 0 (NaN when `f` vanishes there).
    pub measured_nu: f64,
    /// Minus the log-log slope of `f` at large `r` (NaN when `f` vanishes there).
    pub measured_q: f64,
    pub int_rf_0_1: f64,
    pub int_tail_1_inf: f64,
    pub violations: Vec<String>,
}

fn slope<F: Fn(f64) -> f64>(g: F, r: f64) -> f64 {
    let h = 1.0 + 1e-3;
    (g(r * h) / g(r / h)).ln() / (h * h).ln()
}

/// Numerically checks every profile assumption; violations are collected, not raised.
pub fn verify_asymptotics(spec: &ProblemSpec) -> AsymptoticsReport {
    let mut violations = Vec::new();
    let (k, f, n) = (&spec.k, &spec.f, spec.nf());

    let r_lo = 1e-6 * k.inner_scale().min(1.0);
    let r_hi = 1e6 * k.outer_scale().max(1.0);
    let measured_alpha = slope(|r| k.eval(r), r_lo);
    let measured_k0 = k.eval(r_lo) * r_lo.powf(-k.alpha());
    let measured_beta = slope(|r| k.eval(r), r_hi);
    let measured_k_inf = k.eval(r_hi) * r_hi.powf(-k.beta());
    if ((measured_k0 / k.k0()) - 1.0).abs() > 1e-3 {
        violations.push(format!("K r^-alpha -> {measured_k0:.6e} near 0, declared k0 = {}", k.k0()));
    }
    if ((measured_k_inf / k.k_inf()) - 1.0).abs() > 1e-3 {
        violations.push(format!("K r^-beta -> {measured_k_inf:.6e} at large r, declared k_inf = {}", k.k_inf()));
    }
    let probe: Vec<f64> = (-60..=60).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
    if let Some(r) = probe.iter().find(|&&r| !(k.eval(r) > 0.0)) {
        violations.push(format!("K({r:.3e}) is not positive"));
    }
    if let Some(r) = probe.iter().find(|&&r| !(f.eval(r) >= 0.0)) {
        violations.push(format!("f({r:.3e}) is negative"));
    }
    if !matches!(f, ForcingProfile::Zero) && probe.iter().all(|&r| f.eval(r) == 0.0) {
        violations.push("f vanishes identically but is not declared zero".into());
    }
    if let Err(e) = f.validate(spec.n) {
        violations.push(e.to_string());
    }

    let f_lo = 1e-6 * f.inner_scale().min(1.0);
    let measured_nu = if f.eval(f_lo) > 0.0 { slope(|r| f.eval(r), f_lo) } else { f64::NAN };
    let f_hi = 1e6 * f.inner_scale().max(1.0);
    let measured_q = if f.eval(f_hi) > 0.0 { -slope(|r| f.eval(r), f_hi) } else { f64::NAN };
    if measured_q.is_finite() && !(measured_q > n) {
        violations.push(format!("f decays like r^-{measured_q:.4}, needs an exponent above N"));
    }

    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-10, max_intervals: 4000 };
    let int_rf_0_1 = stable_integral(
        |tol| integrate(|r| if r > 0.0 { r * f.eval(r) } else { 0.0 }, 0.0, 1.0, tol),
        opts,
        &mut violations,
        "int_0^1 r f",
    );
    let int_tail_1_inf = stable_integral(
        |tol| integrate_tail(|r| r.powf(n - 1.0) * f.eval(r), 1.0, tol),
        opts,
        &mut violations,
        "int_1^inf r^(N-1) f",
    );

    AsymptoticsReport {
        measured_alpha,
        measured_k0,
        measured_beta,
        measured_k_inf,
        measured_nu,
        measured_q,
        int_rf_0_1,
        int_tail_1_inf,
        violations,
    }
}

fn stable_integral<Q>(q: Q, opts: QuadOptions, violations: &mut Vec<String>, what: &str) -> f64
where
    Q: Fn(QuadOptions) -> Result<crate::quadrature::Quad>,
{
    let coarse = q(opts);
    let fine = q(QuadOptions { rel_tol: opts.rel_tol / 2.0, abs_tol: opts.abs_tol / 2.0, ..opts });
    match (coarse, fine) {
        (Ok(c), Ok(f)) => {
            let scale = f.value.abs().max(1e-300);
            if (c.value - f.value).abs() > 1e-6 * scale {
                violations.push(format!("{what} unstable under refinement"));
            }
            f.value
        }
        _ => {
            violations.push(format!("{what} is not finite"));
            f64::INFINITY
        }
    }
}
