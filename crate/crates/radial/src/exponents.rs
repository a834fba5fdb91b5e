//! Critical exponents and the constants of the Emden–Fowler transform.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An exponent that may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Exponent::Finite(v) => Some(*v),
            Exponent::Infinite => None,
        }
    }

    /// `true` when `p` lies strictly below this exponent.
    pub fn exceeds(&self, p: f64) -> bool {
        match self {
            Exponent::Finite(v) => p < *v,
            Exponent::Infinite => true,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(v) => write!(f, "{v}"),
            Exponent::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(v) => s.serialize_f64(*v),
            Exponent::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Exponent::Finite(v)),
            Repr::Text(s) if s == "inf" => Ok(Exponent::Infinite),
            Repr::Text(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

fn check_dims(n: u32, alpha: f64) -> Result<()> {
    if n < 3 {
        return Err(Error::domain(format!("dimension N = {n} must be at least 3")));
    }
    if !(alpha > -2.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("weight exponent {alpha} must exceed -2")));
    }
    Ok(())
}

/// `p_S(α) = (N + 2 + 2α) / (N − 2)`.
pub fn sobolev_exponent(n: u32, alpha: f64) -> Result<f64> {
    check_dims(n, alpha)?;
    let n = n as f64;
    Ok((n + 2.0 + 2.0 * alpha) / (n - 2.0))
}

/// Joseph–Lundgren exponent; infinite for `N ≤ 10 + 4α`.
pub fn joseph_lundgren_exponent(n: u32, alpha: f64) -> Result<Exponent> {
    check_dims(n, alpha)?;
    let nf = n as f64;
    if nf <= 10.0 + 4.0 * alpha {
        return Ok(Exponent::Infinite);
    }
    let root = ((2.0 + alpha) * (2.0 * nf - 2.0 + alpha)).sqrt();
    let denom = nf - 4.0 - alpha - root;
    Ok(Exponent::Finite(1.0 + 2.0 * (2.0 + alpha) / denom))
}

/// Constants of the transform near the origin (weight `α`, coefficient `k₀`) and
/// their far-field analogues (weight `β`, coefficient `k_∞`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub n: u32,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k0: f64,
    pub k_inf: f64,
    pub p_s_alpha: f64,
    pub p_jl_alpha: Exponent,
    pub p_s_beta: f64,
    pub theta: f64,
    pub a: f64,
    pub c: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub gamma: f64,
    pub theta_tilde: f64,
    pub a_tilde: f64,
    pub c_tilde: f64,
    #[serde(rename = "A_tilde")]
    pub big_a_tilde: f64,
    pub gamma_tilde: f64,
}

/// Builds the table. `A` and `Ã` are only defined when `θc > 0` and `θ̃c̃ > 0`;
/// otherwise they (and `γ`, `γ̃`) are reported as NaN.
pub fn build_exponent_table(n: u32, p: f64, alpha: f64, beta: f64, k0: f64, k_inf: f64) -> Result<ExponentTable> {
    check_dims(n, alpha)?;
    check_dims(n, beta)?;
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("exponent p = {p} must exceed 1")));
    }
    if !(k0 > 0.0) || !(k_inf > 0.0) {
        return Err(Error::domain("k0 and k_inf must be positive"));
    }
    let nf = n as f64;
    let theta = (2.0 + alpha) / (p - 1.0);
    let a = nf - 2.0 - 2.0 * theta;
    let c = nf - 2.0 - theta;
    let big_a = positive_root(theta * c, p);
    let gamma = k0.powf(-1.0 / (p - 1.0)) * big_a;

    let theta_tilde = (2.0 + beta) / (p - 1.0);
    let a_tilde = nf - 2.0 - 2.0 * theta_tilde;
    let c_tilde = nf - 2.0 - theta_tilde;
    let big_a_tilde = positive_root(theta_tilde * c_tilde, p);
    let gamma_tilde = k_inf.powf(-1.0 / (p - 1.0)) * big_a_tilde;

    Ok(ExponentTable {
        n,
        p,
        alpha,
        beta,
        k0,
        k_inf,
        p_s_alpha: sobolev_exponent(n, alpha)?,
        p_jl_alpha: joseph_lundgren_exponent(n, alpha)?,
        p_s_beta: sobolev_exponent(n, beta)?,
        theta,
        a,
        c,
        big_a,
        gamma,
        theta_tilde,
        a_tilde,
        c_tilde,
        big_a_tilde,
        gamma_tilde,
    })
}

fn positive_root(x: f64, p: f64) -> f64 {
    if x > 0.0 {
        x.powf(1.0 / (p - 1.0))
    } else {
        f64::NAN
    }
}

impl ExponentTable {
    /// `A^{p-1}`.
    pub fn a_pow(&self) -> f64 {
        self.theta * self.c
    }

    /// `Ã^{p-1}`.
    pub fn a_tilde_pow(&self) -> f64 {
        self.theta_tilde * self.c_tilde
    }

    /// Roots of `λ² + aλ + (p−1)A^{p−1} = 0`, larger real part first.
    pub fn characteristic_roots(&self) -> [Complex64; 2] {
        quadratic_roots(self.a, (self.p - 1.0) * self.a_pow())
    }

    /// Roots of `λ² + ãλ + (p−1)Ã^{p−1} = 0`, larger real part first.
    pub fn far_characteristic_roots(&self) -> [Complex64; 2] {
        quadratic_roots(self.a_tilde, (self.p - 1.0) * self.a_tilde_pow())
    }
}

fn quadratic_roots(b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // Avoid cancellation in the smaller root.
        let q = -0.5 * (b + b.signum() * s);
        let (r1, r2) = if q != 0.0 { (q, c / q) } else { (0.0, -b) };
        let (hi, lo) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let im = (-disc).sqrt() / 2.0;
        [Complex64::new(-b / 2.0, im), Complex64::new(-b / 2.0, -im)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeReport {
    /// `p > p_S(α)`.
    pub supercritical_at_0: bool,
    /// `p > p_S(β)`.
    pub supercritical_at_inf: bool,
    /// `p < p_JL(α)`.
    pub below_jl: bool,
    /// `θ̃ < N − 2`.
    pub slow_decays_slower_than_fast: bool,
}

pub fn validate_regime(table: &ExponentTable) -> RegimeReport {
    RegimeReport {
        supercritical_at_0: table.p > table.p_s_alpha,
        supercritical_at_inf: table.p > table.p_s_beta,
        below_jl: table.p_jl_alpha.exceeds(table.p),
        slow_decays_slower_than_fast: table.theta_tilde < table.n as f64 - 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Residual of `u'' + (N−1)/r u' + k₀ r^α u^p` at `u = γ r^{-θ}`.
    fn singular_residual(t: &ExponentTable, r: f64) -> f64 {
        let n = t.n as f64;
        let u = t.gamma * r.powf(-t.theta);
        let du = -t.theta * u / r;
        let d2u = t.theta * (t.theta + 1.0) * u / (r * r);
        let lhs = d2u + (n - 1.0) / r * du + t.k0 * r.powf(t.alpha) * u.powf(t.p);
        lhs / (t.k0 * r.powf(t.alpha) * u.powf(t.p))
    }

    #[test]
    fn sobolev_examples() {
        assert_eq!(sobolev_exponent(3, 0.0).unwrap(), 5.0);
        assert_eq!(sobolev_exponent(6, 0.0).unwrap(), 2.0);
        assert_relative_eq!(sobolev_exponent(5, -1.0).unwrap(), 5.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(sobolev_exponent(2, 0.0).is_err());
        assert!(sobolev_exponent(5, -2.0).is_err());
        assert!(joseph_lundgren_exponent(2, 0.0).is_err());
        assert!(build_exponent_table(13, 1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(build_exponent_table(13, 2.0, 0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn joseph_lundgren_threshold() {
        assert_eq!(joseph_lundgren_exponent(10, 0.0).unwrap(), Exponent::Infinite);
        assert_eq!(joseph_lundgren_exponent(14, 1.0).unwrap(), Exponent::Infinite);
        assert!(joseph_lundgren_exponent(11, 0.0).unwrap().finite().is_some());
    }

    #[test]
    fn table_n5_p3() {
        let t = build_exponent_table(5, 3.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(t.theta, 1.0);
        assert_relative_eq!(t.a, 1.0);
        assert_relative_eq!(t.c, 2.0);
        assert_relative_eq!(t.big_a, 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(t.gamma, 2f64.sqrt(), epsilon = 1e-15);
        for r in [0.1, 1.0, 10.0] {
            assert!(singular_residual(&t, r).abs() < 1e-12);
        }
    }

    #[test]
    fn table_n13_p2() {
        let t = build_exponent_table(13, 2.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!((t.theta, t.a, t.c, t.big_a, t.gamma), (2.0, 7.0, 9.0, 18.0, 18.0));
        assert_eq!((t.theta_tilde, t.a_tilde, t.c_tilde, t.big_a_tilde, t.gamma_tilde), (2.0, 7.0, 9.0, 18.0, 18.0));
        let [l1, l2] = t.characteristic_roots();
        assert_relative_eq!(l1.re, -3.5, epsilon = 1e-14);
        assert_relative_eq!(l1.im, (72.0f64 - 49.0).sqrt() / 2.0, epsilon = 1e-14);
        assert_relative_eq!(l2.im, -l1.im);
    }

    #[test]
    fn gamma_tilde_solves_far_fixed_point() {
        let t = build_exponent_table(13, 2.5, 0.5, 1.0, 2.0, 3.0).unwrap();
        let g = t.gamma_tilde;
        let resid = -t.a_tilde_pow() * g + t.k_inf * g.powf(t.p);
        assert!(resid.abs() < 1e-12 * t.a_tilde_pow() * g);
    }

    #[test]
    fn regime_examples() {
        let r = validate_regime(&build_exponent_table(13, 2.0, 0.0, 0.0, 1.0, 1.0).unwrap());
        assert!(r.supercritical_at_0 && r.supercritical_at_inf && r.below_jl);
        assert!(r.slow_decays_slower_than_fast);
        let r = validate_regime(&build_exponent_table(13, 4.0, 0.0, 0.0, 1.0, 1.0).unwrap());
        assert!(!r.below_jl);
        let r = validate_regime(&build_exponent_table(3, 4.0, 0.0, 0.0, 1.0, 1.0).unwrap());
        assert!(!r.supercritical_at_0);
    }

    #[test]
    fn exponent_json() {
        let s = serde_json::to_string(&[Exponent::Finite(2.5), Exponent::Infinite]).unwrap();
        assert_eq!(s, "[2.5,\"inf\"]");
        let back: Vec<Exponent> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![Exponent::Finite(2.5), Exponent::Infinite]);
        assert_eq!(Exponent::Infinite.to_string(), "inf");
    }

    proptest! {
        #[test]
        fn jl_exceeds_sobolev(n in 3u32..60, alpha in -1.9f64..6.0) {
            let ps = sobolev_exponent(n, alpha).unwrap();
            if let Exponent::Finite(pjl) = joseph_lundgren_exponent(n, alpha).unwrap() {
                prop_assert!(pjl > ps);
            }
        }

        #[test]
        fn table_identities(n in 3u32..40, alpha in -1.9f64..4.0, beta in -1.9f64..4.0,
                            k0 in 0.1f64..10.0, kinf in 0.1f64..10.0, dp in 0.01f64..3.0) {
            let ps = sobolev_exponent(n, alpha.max(beta)).unwrap();
            let p = ps + dp;
            let t = build_exponent_table(n, p, alpha, beta, k0, kinf).unwrap();
            let reg = validate_regime(&t);
            prop_assert_eq!(t.a > 0.0, reg.supercritical_at_0);
            prop_assert!(reg.slow_decays_slower_than_fast);
            let ap = t.big_a.powf(p - 1.0);
            prop_assert!((ap - t.theta * t.c).abs() <= 1e-12 * ap);
            let apt = t.big_a_tilde.powf(p - 1.0);
            prop_assert!((apt - t.theta_tilde * t.c_tilde).abs() <= 1e-12 * apt);
            let gk = t.gamma.powf(p - 1.0) * k0;
            prop_assert!((gk - t.a_pow()).abs() <= 1e-12 * gk);
            for r in [0.1, 1.0, 10.0] {
                prop_assert!(singular_residual(&t, r).abs() < 1e-12);
            }
        }
    }
}
