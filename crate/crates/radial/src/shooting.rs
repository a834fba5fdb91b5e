//! Regular solutions `u(·, ζ)` with `u(0) = ζ`, and the Emden–Fowler form of the equation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate, Dense, Flow, Options};
use crate::profiles::{emden_fowler_coeffs, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step in `t = ln r`.
    pub max_dt: f64,
    pub max_steps: usize,
    /// Initial `t` for the singular-solution construction.
    pub t_start: f64,
    /// Stop a trajectory at its first zero instead of continuing with `max(u, 0)^p`.
    pub stop_at_zero: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_dt: 0.05, max_steps: 2_000_000, t_start: -30.0, stop_at_zero: true }
    }
}

impl SolverOptions {
    pub(crate) fn integrator(&self) -> Options {
        Options { rtol: self.rtol, atol: self.atol, h_max: self.max_dt, h_init: None, max_steps: self.max_steps }
    }

    pub fn halved(&self) -> Self {
        Self { rtol: self.rtol / 2.0, atol: self.atol / 2.0, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.max_dt > 0.0) || self.max_steps == 0 {
            return Err(Error::domain("tolerances, max_dt and max_steps must be positive"));
        }
        if !(self.t_start < -5.0) {
            return Err(Error::domain("t_start must be below -5"));
        }
        Ok(())
    }
}

/// Which solution a trajectory belongs to: regular with `u(0) = ζ`, the singular one, or an
/// exterior solution with `r^{N−2} u → η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zeta {
    Regular(f64),
    Singular,
    Exterior(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    HitZero {
        r0: f64,
    },
    ReachedRmax,
    StepFailure {
        r: f64,
        reason: String,
    },
    /// The step budget ran out before `r_max`.
    StepBudget {
        r: f64,
        max_steps: usize,
    },
}

impl Termination {
    /// The error equivalent of an abnormal termination.
    pub fn failure(&self) -> Option<Error> {
        match self {
            Termination::StepFailure { r, reason } => Some(Error::StepFailure { t: r.ln(), reason: reason.clone() }),
            Termination::StepBudget { r, max_steps } => {
                Some(Error::Budget(format!("step budget {max_steps} exhausted at r = {r:e}")))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub r: f64,
    pub u: f64,
    pub du: f64,
}

/// How the integrated state relates to `(u, r u_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateForm {
    /// State `(u, r u_r)`.
    Radial,
    /// State `(w, w')` with `w = e^{θt} u`.
    EmdenFowler { theta: f64 },
}

impl StateForm {
    /// Maps an integrated state at `t` to `(u, r u_r)`.
    pub fn to_radial(&self, t: f64, y: &[f64; 2]) -> [f64; 2] {
        match *self {
            StateForm::Radial => *y,
            StateForm::EmdenFowler { theta } => {
                let e = (-theta * t).exp();
                [e * y[0], e * (y[1] - theta * y[0])]
            }
        }
    }
}

/// Piecewise dense output in `t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DenseTrack {
    segments: Vec<Dense<2>>,
}

impl DenseTrack {
    pub fn push(&mut self, d: &Dense<2>) {
        self.segments.push(d.clone());
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn t_range(&self) -> Option<(f64, f64)> {
        Some((self.segments.first()?.t_old, self.segments.last()?.t_new()))
    }

    pub fn eval(&self, t: f64) -> Option<[f64; 2]> {
        let (lo, hi) = self.t_range()?;
        if t < lo || t > hi {
            return None;
        }
        let i = self.segments.partition_point(|s| s.t_new() < t).min(self.segments.len() - 1);
        Some(self.segments[i].eval(t))
    }

    pub fn truncate_at(&mut self, t: f64) {
        if let Some(i) = self.segments.iter().position(|s| s.t_new() >= t) {
            self.segments.truncate(i + 1);
        }
    }
}

/// A sampled radial trajectory `(r, u, u_r)` with its termination status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub spec: ProblemSpec,
    pub zeta: Zeta,
    pub r_start: f64,
    pub rtol: f64,
    pub atol: f64,
    pub termination: Termination,
    pub samples: Vec<Sample>,
    #[serde(skip)]
    track: DenseTrack,
    #[serde(skip, default = "radial_form")]
    form: StateForm,
}

fn radial_form() -> StateForm {
    StateForm::Radial
}

impl RadialSolution {
    pub(crate) fn from_parts(
        spec: ProblemSpec,
        zeta: Zeta,
        opts: &SolverOptions,
        termination: Termination,
        samples: Vec<Sample>,
        track: DenseTrack,
        form: StateForm,
    ) -> Self {
        let r_start = samples.first().map_or(f64::NAN, |s| s.r);
        Self { spec, zeta, r_start, rtol: opts.rtol, atol: opts.atol, termination, samples, track, form }
    }

    /// Trajectory known only through its samples (evaluated by Hermite interpolation).
    pub fn from_samples(spec: ProblemSpec, zeta: Zeta, samples: Vec<Sample>) -> Self {
        let r_start = samples.first().map_or(f64::NAN, |s| s.r);
        let track = DenseTrack::default();
        Self {
            spec,
            zeta,
            r_start,
            rtol: 0.0,
            atol: 0.0,
            termination: Termination::ReachedRmax,
            samples,
            track,
            form: StateForm::Radial,
        }
    }

    pub fn r_min(&self) -> f64 {
        self.samples.first().map_or(f64::NAN, |s| s.r)
    }

    pub fn r_max(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.r)
    }

    pub fn first_zero(&self) -> Option<f64> {
        match self.termination {
            Termination::HitZero { r0 } => Some(r0),
            _ => None,
        }
    }

    pub fn state_form(&self) -> StateForm {
        self.form
    }

    pub fn has_dense_output(&self) -> bool {
        !self.track.is_empty()
    }

    /// `(u, r u_r)` at `t = ln r`.
    pub fn state_at_t(&self, t: f64) -> Option<[f64; 2]> {
        if let Some(y) = self.track.eval(t) {
            return Some(self.form.to_radial(t, &y));
        }
        self.hermite(t)
    }

    /// `(u(r), u_r(r))`, or `None` outside the covered range.
    pub fn eval(&self, r: f64) -> Option<(f64, f64)> {
        if !(r > 0.0) {
            return None;
        }
        let [u, s] = self.state_at_t(r.ln())?;
        Some((u, s / r))
    }

    /// `(w, w')` for `w(t) = e^{κt} u(e^t)` with an arbitrary weight `κ`.
    pub fn weighted_at_t(&self, t: f64, kappa: f64) -> Option<[f64; 2]> {
        if let (StateForm::EmdenFowler { theta }, Some(y)) = (self.form, self.track.eval(t)) {
            if theta == kappa {
                return Some(y);
            }
        }
        let [u, s] = self.state_at_t(t)?;
        let e = (kappa * t).exp();
        Some([e * u, e * (s + kappa * u)])
    }

    /// Cubic Hermite interpolation on the stored samples (used after deserialization).
    fn hermite(&self, t: f64) -> Option<[f64; 2]> {
        let n = self.samples.len();
        if n < 2 {
            return None;
        }
        let ts = |i: usize| self.samples[i].r.ln();
        if t < ts(0) || t > ts(n - 1) {
            return None;
        }
        let i = self.samples.partition_point(|s| s.r.ln() < t).clamp(1, n - 1);
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let (t0, t1) = (ts(i - 1), ts(i));
        let h = t1 - t0;
        let x = (t - t0) / h;
        let (s0, s1) = (a.du * a.r, b.du * b.r);
        let h00 = 2.0 * x.powi(3) - 3.0 * x * x + 1.0;
        let h10 = x.powi(3) - 2.0 * x * x + x;
        let h01 = -2.0 * x.powi(3) + 3.0 * x * x;
        let h11 = x.powi(3) - x * x;
        let u = h00 * a.u + h10 * h * s0 + h01 * b.u + h11 * h * s1;
        let lin = s0 + x * (s1 - s0);
        Some([u, lin])
    }

    /// Writes `r,u,du` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_samples_csv(&self.samples, w)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn write_samples_csv<W: Write>(samples: &[Sample], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["r", "u", "du"])?;
    for s in samples {
        wtr.write_record([format!("{:e}", s.r), format!("{:e}", s.u), format!("{:e}", s.du)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(r: R) -> Result<Vec<Sample>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Table(format!("bad trajectory row {:?}", rec)))
        };
        out.push(Sample { r: get(0)?, u: get(1)?, du: get(2)? });
    }
    Ok(out)
}

/// Start radius for the two-term expansion `u ≈ ζ − c₁ r^{2+α} − c₂ r^{2+ν}`, with `(u, r u_r)` there.
pub fn series_start(spec: &ProblemSpec, zeta: f64, opts: &SolverOptions) -> (f64, f64, f64) {
    let (c1, c2) = series_coeffs(spec, zeta);
    let (alpha, nu) = (spec.k.alpha(), spec.f.nu());
    let delta = 0.1 * opts.rtol.sqrt();
    let mut r = 1e-3 * spec.k.inner_scale().min(spec.f.inner_scale());
    r = r.min((delta * zeta / c1).powf(1.0 / (2.0 + alpha)));
    if c2 != 0.0 {
        r = r.min((delta * zeta / c2.abs()).powf(1.0 / (2.0 + nu)));
    }
    series_at(spec, zeta, r)
}

fn series_coeffs(spec: &ProblemSpec, zeta: f64) -> (f64, f64) {
    let n = spec.nf();
    let (alpha, nu) = (spec.k.alpha(), spec.f.nu());
    let c1 = spec.k.k0() * zeta.powf(spec.p) / ((2.0 + alpha) * (n + alpha));
    let c2 = spec.mu * spec.f.f0() / ((2.0 + nu) * (n + nu));
    (c1, c2)
}

pub(crate) fn series_at(spec: &ProblemSpec, zeta: f64, r: f64) -> (f64, f64, f64) {
    let (c1, c2) = series_coeffs(spec, zeta);
    let (e1, e2) = (2.0 + spec.k.alpha(), 2.0 + spec.f.nu());
    let u = zeta - c1 * r.powf(e1) - c2 * r.powf(e2);
    let s = -e1 * c1 * r.powf(e1) - e2 * c2 * r.powf(e2);
    (r, u, s)
}

/// `d/dt (u, s)` with `s = r u_r`, `r = e^t`.
pub(crate) fn radial_rhs(spec: &ProblemSpec) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
    let n2 = spec.nf() - 2.0;
    move |t, y| {
        let r = t.exp();
        [y[1], -n2 * y[1] - r * r * spec.source(r, y[0])]
    }
}

/// `d/dt (w, w')` for `w'' + a w' − A^{p−1} w + L max(w,0)^p + μ g = 0`.
pub(crate) fn emden_fowler_rhs(spec: &ProblemSpec) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
    let tab = *spec.table();
    let (a, ap, p, mu) = (tab.a, tab.a_pow(), spec.p, spec.mu);
    move |t, y| {
        let (l, g) = emden_fowler_coeffs(spec, t);
        let nl = if y[0] > 0.0 { l * y[0].powf(p) } else { 0.0 };
        let forcing = if mu == 0.0 { 0.0 } else { mu * g };
        [y[1], -a * y[1] + ap * y[0] - nl - forcing]
    }
}

/// Integrates a trajectory in `t` from `t0` to `t1`, sampling every accepted step and
/// (optionally) stopping at the first zero of `u`. Step failures end the trajectory.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_trajectory<F>(
    spec: &ProblemSpec,
    zeta: Zeta,
    rhs: F,
    form: StateForm,
    t0: f64,
    y0: [f64; 2],
    t1: f64,
    opts: &SolverOptions,
) -> RadialSolution
where
    F: Fn(f64, &[f64; 2]) -> [f64; 2],
{
    let to_sample = |t: f64, y: &[f64; 2]| {
        let [u, s] = form.to_radial(t, y);
        let r = t.exp();
        Sample { r, u, du: s / r }
    };
    let mut samples = vec![to_sample(t0, &y0)];
    let mut track = DenseTrack::default();
    let mut zero: Option<f64> = None;
    let atol = opts.atol;
    let outcome = integrate(
        |t, y| rhs(t, y),
        t0,
        y0,
        t1,
        &opts.integrator(),
        |d, y| {
            track.push(d);
            if opts.stop_at_zero && y[0] <= 0.0 {
                let tz = if y[0] == 0.0 { d.t_new() } else { d.locate(|s| s[0], d.t_old, d.t_new(), atol) };
                zero = Some(tz);
                samples.push(to_sample(tz, &d.eval(tz)));
                return Flow::Stop;
            }
            samples.push(to_sample(d.t_new(), y));
            Flow::Continue
        },
    );
    let termination = match (outcome, zero) {
        (Ok(_), Some(tz)) => {
            track.truncate_at(tz);
            Termination::HitZero { r0: tz.exp() }
        }
        (Ok(_), None) => Termination::ReachedRmax,
        (Err(e), _) => {
            let r = samples.last().map_or(f64::NAN, |s| s.r);
            match e {
                Error::Budget(_) => Termination::StepBudget { r, max_steps: opts.max_steps },
                e => Termination::StepFailure { r, reason: e.to_string() },
            }
        }
    };
    RadialSolution::from_parts(spec.clone(), zeta, opts, termination, samples, track, form)
}

/// Regular solution with `u(0) = ζ` on `(0, min(r₀, r_max)]`.
pub fn regular_solve(spec: &ProblemSpec, zeta: f64, r_max: f64, opts: &SolverOptions) -> Result<RadialSolution> {
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(Error::domain(format!("zeta = {zeta} must be positive")));
    }
    if !(r_max > 0.0) {
        return Err(Error::domain(format!("r_max = {r_max} must be positive")));
    }
    opts.validate()?;
    let (mut r0, mut u0, mut s0) = series_start(spec, zeta, opts);
    if r0 >= 1e-3 * r_max {
        (r0, u0, s0) = series_at(spec, zeta, 1e-3 * r_max);
    }
    Ok(run_trajectory(
        spec,
        Zeta::Regular(zeta),
        radial_rhs(spec),
        StateForm::Radial,
        r0.ln(),
        [u0, s0],
        r_max.ln(),
        opts,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FirstZero {
    At { r0: f64 },
    NotFoundBelow { r_max: f64 },
}

/// First zero `r₀(ζ)` of the regular solution, searched up to `r_max`.
pub fn first_zero(spec: &ProblemSpec, zeta: f64, r_max: f64, opts: &SolverOptions) -> Result<FirstZero> {
    let o = SolverOptions { stop_at_zero: true, ..*opts };
    let sol = regular_solve(spec, zeta, r_max, &o)?;
    match sol.termination {
        Termination::HitZero { r0 } => Ok(FirstZero::At { r0 }),
        Termination::ReachedRmax => Ok(FirstZero::NotFoundBelow { r_max }),
        t => Err(t.failure().expect("abnormal termination")),
    }
}

/// Trajectory `(t, w, w')` of the Emden–Fowler equation.
#[derive(Debug, Clone, PartialEq)]
pub struct EfTrajectory {
    pub theta: f64,
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    track: DenseTrack,
}

impl EfTrajectory {
    pub fn eval(&self, t: f64) -> Option<[f64; 2]> {
        self.track.eval(t)
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }
}

/// Solves `w'' + a w' − A^{p−1} w + L(t) max(w,0)^p + μ g(t) = 0` on `[t0, t1]`.
pub fn integrate_emden_fowler(
    spec: &ProblemSpec,
    w0: f64,
    dw0: f64,
    t0: f64,
    t1: f64,
    opts: &SolverOptions,
) -> Result<EfTrajectory> {
    let rhs = emden_fowler_rhs(spec);
    let mut out = EfTrajectory {
        theta: spec.table().theta,
        t: vec![t0],
        w: vec![w0],
        dw: vec![dw0],
        track: DenseTrack::default(),
    };
    integrate(&rhs, t0, [w0, dw0], t1, &opts.integrator(), |d, y| {
        out.track.push(d);
        out.t.push(d.t_new());
        out.w.push(y[0]);
        out.dw.push(y[1]);
        Flow::Continue
    })?;
    Ok(out)
}
