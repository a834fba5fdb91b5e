//! One function per subcommand; each fills a [`Collector`] and returns a short summary.

use radial::exponents::{build_exponent_table, validate_regime, ExponentTable, RegimeReport};
use radial::intersection::intersection_growth;
use radial::muscan::{bounded_solution_census, find_mu1, positivity_probe, scan_mu, CensusReport, MuClass};
use radial::shooting::{regular_solve, write_samples_csv, FirstZero, Sample};
use radial::singular::singular_extend;
use radial::{CoefficientProfile, SolverOptions, Termination};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::output::Collector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Critical exponents, transform constants and regime flags.
    Exponents,
    /// Regular solution with `u(0) = task.zeta` up to `solver.r_max`.
    Solve,
    /// Singular solution up to `solver.r_max`.
    Singular,
    /// Intersection counts with the singular solution over the ζ grid.
    Intersections,
    /// First zeros and weighted tails of regular solutions over the ζ grid.
    SweepZeta,
    /// Classification of μ, with the μ₁ bracket and fast-decay roots.
    ScanMu,
    /// Positivity, tail class and intersection count over the ζ grid.
    Census,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Exponents => "exponents",
            Command::Solve => "solve",
            Command::Singular => "singular",
            Command::Intersections => "intersections",
            Command::SweepZeta => "sweep-zeta",
            Command::ScanMu => "scan-mu",
            Command::Census => "census",
        }
    }
}

/// Lines for the terminal, plus a failure to report after the outputs have been written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub summary: Vec<String>,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn line(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }
}

pub fn run(cmd: Command, cfg: &LoadedConfig, out: &mut Collector) -> Result<Outcome, CliError> {
    match cmd {
        Command::Exponents => exponents(cfg, out),
        Command::Solve => solve(cfg, out),
        Command::Singular => singular(cfg, out),
        Command::Intersections => intersections(cfg, out),
        Command::SweepZeta => sweep_zeta(cfg, out),
        Command::ScanMu => scan(cfg, out),
        Command::Census => census(cfg, out),
    }
}

fn samples_csv(samples: &[Sample]) -> impl FnOnce(&mut Vec<u8>) -> Result<(), CliError> + '_ {
    move |buf| Ok(write_samples_csv(samples, buf)?)
}

fn positive_part(samples: &[Sample]) -> impl Iterator<Item = (f64, f64)> + '_ {
    samples.iter().filter(|s| s.u > 0.0).map(|s| (s.r, s.u))
}

#[derive(Serialize)]
struct ExponentReport {
    table: ExponentTable,
    regime: RegimeReport,
    /// Roots of `λ² + aλ + (p−1)A^{p−1}` as `[re, im]` pairs.
    characteristic_roots: [[f64; 2]; 2],
    far_characteristic_roots: [[f64; 2]; 2],
}

pub fn exponent_text(t: &ExponentTable, r: &RegimeReport) -> Vec<String> {
    let rows: Vec<(&str, String)> = vec![
        ("N", t.n.to_string()),
        ("p", t.p.to_string()),
        ("alpha", t.alpha.to_string()),
        ("beta", t.beta.to_string()),
        ("p_S(alpha)", t.p_s_alpha.to_string()),
        ("p_JL(alpha)", t.p_jl_alpha.to_string()),
        ("p_S(beta)", t.p_s_beta.to_string()),
        ("theta", t.theta.to_string()),
        ("a", t.a.to_string()),
        ("c", t.c.to_string()),
        ("A", t.big_a.to_string()),
        ("gamma", t.gamma.to_string()),
        ("theta_tilde", t.theta_tilde.to_string()),
        ("gamma_tilde", t.gamma_tilde.to_string()),
        ("supercritical_at_0", r.supercritical_at_0.to_string()),
        ("supercritical_at_inf", r.supercritical_at_inf.to_string()),
        ("below_jl", r.below_jl.to_string()),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.into_iter().map(|(k, v)| format!("{k:<width$}  {v}")).collect()
}

fn exponents(cfg: &LoadedConfig, out: &mut Collector) -> Result<Outcome, CliError> {
    let pb = &cfg.config.problem;
    let k: CoefficientProfile = cfg.coefficient()?;
    let table = build_exponent_table(pb.n, pb.p, k.alpha(), k.beta(), k.k0(), k.k_inf())?;
    let regime = validate_regime(&table);
    let (c, f) = (table.characteristic_roots(), table.far_characteristic_roots());
    let report = ExponentReport {
        table,
        regime,
        characteristic_roots: [[c[0].re, c[0].im], [c[1].re, c[1].im]],
        far_characteristic_roots: [[f[0].re, f[0].im], [f[1].re, f[1].im]],
    };
    out.json("exponents.json", &report)?;
    let text = exponent_text(&table, &regime);
    let mut body = text.join("\n");
    body.push('\n');
    out.add("exponents.txt", body.into_bytes());
    Ok(Outcome { summary: text, failure: None })
}

fn solve(cfg: &LoadedConfig, out: &mut Collector) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let opts = cfg.solver()?;
    let zeta = cfg.config.task.zeta;
    let sol = regular_solve(&spec, zeta, cfg.config.solver.r_max, &opts)?;
    out.csv("trajectory.csv", samples_csv(&sol.samples))?;
    out.json("trajectory.json", &sol)?;
    out.plot("u_vs_r.dat", ("r", "u"), positive_part(&sol.samples));
    let mut o = Outcome::default();
    o.line(format!("zeta = {zeta:e}, {} samples on [{:e}, {:e}]", sol.samples.len(), sol.r_min(), sol.r_max()));
    match &sol.termination {
        Termination::HitZero { r0 } => o.line(format!("hit zero at r0 = {r0:e}")),
        Termination::ReachedRmax => o.line("positive up to r_max"),
        t => o.failure = t.failure().map(CliError::from),
    }
    Ok(o)
}

fn singular(cfg: &LoadedConfig, out: &mut Collector) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let opts = cfg.solver()?;
    let star = singular_extend(&spec, cfg.config.solver.r_max, &opts)?;
    out.csv("singular.csv", samples_csv(&star.solution.samples))?;
    out.json("singular.json", &star)?;
    out.plot("u_vs_r.dat", ("r", "u"), positive_part(&star.solution.samples));
    let mut o = Outcome::default();
    o.line(format!(
        "t_start = {}, richardson delta = {:.3e}, {} samples",
        star.t_start,
        star.richardson_delta,
        star.solution.samples.len()
    ));
    o.line(match star.first_zero() {
        Some(r0) => format!("u* vanishes at r0 = {r0:e}"),
        None => format!("u* positive up to r = {:e}", cfg.config.solver.r_max),
    });
    Ok(o)
}

fn intersections(cfg: &LoadedConfig, out: &mut Collector) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let opts = cfg.solver()?;
    let task = &cfg.config.task;
    let table = intersection_growth(&spec, &task.zeta_grid(), task.rho, &opts)?;
    out.csv("intersections.csv", |buf| Ok(table.write_csv(buf)?))?;
    out.json("intersections.json", &table)?;
    out.plot("count_vs_zeta.dat", ("zeta", "count"), table.rows.iter().map(|r| (r.zeta, r.count as f64)));
    let mut o = Outcome::default();
    for row in &table.rows {
        o.line(format!("zeta = {:e}: {} intersections", row.zeta, row.count));
    }
    o.line(format!("nondecreasing: {}", table.nondecreasing));
    Ok(o)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    zeta: f64,
    first_zero: FirstZero,
    /// `r_max^θ u(r_max) / γ` for solutions positive up to `r_max`.
    weighted_ratio: Option<f64>,
}

fn sweep_zeta(cfg: &LoadedConfig, out: &mut Collector) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let opts = cfg.solver()?;
    let r_max = cfg.config.solver.r_max;
    let tab = spec.table();
    let rows = cfg
        .config
        .task
        .zeta_grid()
        .par_iter()
        .map(|&zeta| {
            let sol = regular_solve(&spec, zeta, r_max, &SolverOptions { stop_at_zero: true, ..opts })?;
            let (first_zero, weighted_ratio) = match &sol.termination {
                Termination::HitZero { r0 } => (FirstZero::At { r0: *r0 }, None),
                Termination::ReachedRmax => (
                    FirstZero::NotFoundBelow { r_max },
                    sol.eval(r_max).map(|(u, _)| r_max.powf(tab.theta) * u / tab.gamma),
                ),
                t => return Err(t.failure().expect("abnormal termination")),
            };
            Ok(SweepRow { zeta, first_zero, weighted_ratio })
        })
        .collect::<Result<Vec<_>, radial::Error>>()?;
    out.csv("sweep.csv", |buf| {
        let mut w = csv_writer(buf);
        w.write_record(["zeta", "r0", "weighted_ratio"]).map_err(csv_err)?;
        for row in &rows {
            let r0 = match row.first_zero {
                FirstZero::At { r0 } => r0,
                FirstZero::NotFoundBelow { .. } => f64::INFINITY,
            };
            let wr = row.weighted_ratio.unwrap_or(f64::NAN);
            w.write_record([format!("{:e}", row.zeta), format!("{r0:e}"), format!("{wr:e}")]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.json("sweep.json", &rows)?;
    let zeros: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| match r.first_zero {
            FirstZero::At { r0 } => Some((r.zeta, r0)),
            FirstZero::NotFoundBelow { .. } => None,
        })
        .collect();
    out.plot("r0_vs_zeta.dat", ("zeta", "r0"), zeros.iter().copied());
    let mut o = Outcome::default();
    o.line(format!("{} values of zeta, {} with a zero below r_max = {r_max:e}", rows.len(), zeros.len()));
    Ok(o)
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(buf)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Output(e.to_string())
}

fn class_code(c: &MuClass) -> f64 {
    match c {
        MuClass::SlowDecay => 0.0,
        MuClass::FastDecay { .. } => 1.0,
        MuClass::PositivityFailure { .. } => 2.0,
        MuClass::Undetermined { .. } => 3.0,
    }
}

fn scan(cfg: &LoadedConfig, out: &mut Collector) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let opts = cfg.scan()?;
    let report = scan_mu(&spec, cfg.config.task.grid_n, &opts)?;
    out.csv("classes.csv", |buf| Ok(report.write_classes_csv(buf)?))?;
    out.json("scan.json", &report)?;
    out.plot("class_vs_mu.dat", ("mu", "class"), report.grid.iter().map(|c| (c.mu, class_code(&c.class))));
    out.plot("h_vs_mu.dat", ("mu", "H"), report.grid.iter().filter_map(|c| c.h.map(|h| (c.mu, h))));
    let mut o = Outcome::default();
    o.line(format!("probe = {:e}, mu_max = {:e}", report.probe, report.mu_max));
    match report.mu1_estimate {
        Some((lo, hi)) => o.line(format!("mu1 in [{lo}, {hi}]")),
        None => o.line("mu1 not located"),
    }
    for (lo, hi) in &report.fast_roots {
        o.line(format!("fast-decay root in [{lo}, {hi}]"));
    }
    o.summary.extend(report.notes.iter().cloned());
    Ok(o)
}

#[derive(Debug, Serialize)]
struct CensusOutput {
    /// Bracket of μ₁ when the census μ was derived from it.
    mu1: Option<(f64, f64)>,
    report: CensusReport,
}

fn census(cfg: &LoadedConfig, out: &mut Collector) -> Result<Outcome, CliError> {
    let mut spec = cfg.spec()?;
    let task = &cfg.config.task;
    let mut mu1 = None;
    if let Some(frac) = task.mu_over_mu1 {
        let opts = cfg.scan()?;
        let probe = positivity_probe(&spec, &opts)?;
        let m = find_mu1(&spec, 2.0 * probe, &opts)?;
        spec = spec.with_mu(frac * 0.5 * (m.lo + m.hi));
        mu1 = Some((m.lo, m.hi));
    }
    let opts = cfg.solver()?;
    let report = bounded_solution_census(&spec, &task.zeta_grid(), task.r_budget, task.rho, &opts)?;
    out.csv("census.csv", |buf| {
        let mut w = csv_writer(buf);
        w.write_record(["zeta", "count", "positive", "tail"]).map_err(csv_err)?;
        for row in &report.rows {
            let tail = serde_json::to_value(row.tail)?;
            let tail = tail.get("kind").and_then(|k| k.as_str()).unwrap_or("").to_string();
            w.write_record([
                format!("{:e}", row.zeta),
                row.count.to_string(),
                row.positive_to_budget.to_string(),
                tail,
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.plot("count_vs_zeta.dat", ("zeta", "count"), report.rows.iter().map(|r| (r.zeta, r.count as f64)));
    let mut o = Outcome::default();
    o.line(format!("mu = {}, {} rows, {} increments", report.mu, report.rows.len(), report.increments.len()));
    for inc in &report.increments {
        o.line(format!(
            "count {} -> {} between zeta = {:e} and {:e}",
            inc.count_lo, inc.count_hi, inc.zeta_lo, inc.zeta_hi
        ));
    }
    out.json("census.json", &CensusOutput { mu1, report })?;
    Ok(o)
}
