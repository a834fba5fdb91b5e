//! Acceptance suite: one PASS/FAIL line per criterion, with runtimes.
//!
//! Run with `cargo test -p radial-cli --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radial::exponents::{joseph_lundgren_exponent, Exponent};
use radial::farfield::{
    eta_limit, fast_decay_solve, slow_decay_energy, EtaLimit, MatchingFunctions, CONTRACTION_LIMIT,
};
use radial::intersection::intersection_growth;
use radial::muscan::{
    bounded_solution_census, classify_mu, find_mu1, log_grid, positivity_probe, MuClass, ScanOptions,
};
use radial::shooting::regular_solve;
use radial::singular::{explicit_singular, picard_singular_oracle, singular_extend};
use radial::{CoefficientProfile, ForcingProfile, ProblemSpec, SolverOptions};

// Tolerances and budgets, one per criterion.
const EXPLICIT_REL: f64 = 1e-8;
const EXPLICIT_BUDGET: Duration = Duration::from_secs(5);
const JL_DIGITS_REL: f64 = 1e-12;
const SCALING_REL: f64 = 1e-6;
const SCALING_PAIRS: usize = 20;
const SCALING_BUDGET: Duration = Duration::from_secs(10);
const REGULAR_TAIL_REL: f64 = 1e-2;
const SINGULAR_TAIL_REL: f64 = 1e-4;
const MIN_MAX_COUNT: usize = 3;
const SIGMA_REL: f64 = 0.2;
const INTERSECTION_BUDGET: Duration = Duration::from_secs(120);
const DECAY_RATE_REL: f64 = 0.05;
const ETA_ROUND_TRIP_REL: f64 = 1e-6;
const MIN_V_SLOPE: f64 = 0.5;
const ENERGY_BALANCE: f64 = 1e-8;
const MU1_WIDTH: f64 = 1e-3;
const MU_SCAN_BUDGET: Duration = Duration::from_secs(600);
const CENSUS_POINTS: usize = 200;
const MIN_INCREMENTS: usize = 3;
const CENSUS_BUDGET: Duration = Duration::from_secs(900);
const CROSS_METHOD_ABS: f64 = 1e-6;

type Outcome = Result<(bool, String), String>;

struct Suite {
    passed: usize,
    failed: usize,
}

impl Suite {
    fn check(&mut self, id: u32, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let ok = ok && in_time;
        let budget_note = match budget {
            Some(b) if !in_time => format!(" [over budget {:.0} s]", b.as_secs_f64()),
            Some(b) => format!(" [budget {:.0} s]", b.as_secs_f64()),
            None => String::new(),
        };
        println!(
            "{} {id:>2} {name}: {detail} ({:.2} s){budget_note}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

fn homogeneous(p: f64, alpha: f64) -> ProblemSpec {
    ProblemSpec::homogeneous(13, p, alpha, 1.0).expect("valid homogeneous spec")
}

fn forced(mu: f64) -> ProblemSpec {
    ProblemSpec::new(
        13,
        2.0,
        CoefficientProfile::PurePower { alpha: 0.0, k0: 1.0 },
        ForcingProfile::PowerDecayBump { nu: 0.0, q: 14.0, amplitude: 1.0 },
        mu,
    )
    .expect("valid forced spec")
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn explicit_singular_matches() -> Outcome {
    let opts = SolverOptions::default();
    let mut worst = 0.0f64;
    for alpha in [0.0, 1.0] {
        let spec = homogeneous(2.0, alpha);
        let star = singular_extend(&spec, 1e3, &opts).map_err(|e| e.to_string())?;
        let sampled = star.solution.samples.iter().filter(|s| (1e-3..=1e3).contains(&s.r)).map(|s| (s.r, s.u));
        let probes = log_grid(1e-3, 1e3, 61).into_iter().map(|r| (r, star.eval(r).map_or(f64::NAN, |(u, _)| u)));
        for (r, u) in sampled.chain(probes) {
            let e = rel(u, explicit_singular(&spec, r));
            worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
        }
    }
    Ok((
        worst < EXPLICIT_REL,
        format!("max rel err {worst:.2e} on [1e-3, 1e3], alpha in {{0, 1}} (tol {EXPLICIT_REL:e})"),
    ))
}

/// `1 + 4/(N − 4 − √(4N − 4))` in scaled integer arithmetic, as a decimal string.
fn jl_oracle(n: u64) -> f64 {
    let scale = BigInt::from(10).pow(60);
    let root = (BigInt::from(4 * n - 4) * &scale * &scale).sqrt();
    let denom = BigInt::from(n - 4) * &scale - root;
    let value = &scale + BigInt::from(4) * &scale * &scale / denom;
    let digits = value.to_string();
    let (int, frac) = digits.split_at(digits.len() - 60);
    format!("{int}.{frac}").parse().expect("decimal")
}

fn exponent_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for n in [13u64, 11] {
        let lib = joseph_lundgren_exponent(n as u32, 0.0).map_err(|e| e.to_string())?;
        let oracle = jl_oracle(n);
        let e = lib.finite().map_or(f64::INFINITY, |v| rel(v, oracle));
        worst = worst.max(e);
        detail.push(format!("p_JL({n},0) = {lib} vs {oracle:.15}"));
    }
    let ten = joseph_lundgren_exponent(10, 0.0).map_err(|e| e.to_string())?;
    detail.push(format!("p_JL(10,0) = {ten}"));
    let ok = worst < JL_DIGITS_REL && ten == Exponent::Infinite;
    Ok((ok, format!("{}; max rel err {worst:.1e} (tol {JL_DIGITS_REL:e})", detail.join(", "))))
}

fn scaling_law() -> Outcome {
    let spec = homogeneous(2.0, 0.0);
    let opts = SolverOptions::default();
    let theta = spec.table().theta;
    let mut rng = ChaCha8Rng::seed_from_u64(20240917);
    let pairs: Vec<(f64, f64)> = (0..SCALING_PAIRS)
        .map(|_| (10f64.powf(rng.gen_range(-2.0..1.0)), 10f64.powf(rng.gen_range(-2.0..2.0))))
        .collect();
    let reach = pairs.iter().map(|&(r, z)| z.powf(1.0 / theta) * r).fold(0.0, f64::max);
    let base = regular_solve(&spec, 1.0, 1.01 * reach, &opts).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for &(r, zeta) in &pairs {
        let sol = regular_solve(&spec, zeta, 1.01 * r, &opts).map_err(|e| e.to_string())?;
        let (u, _) = sol.eval(r).ok_or("r outside trajectory")?;
        let (u1, _) = base.eval(zeta.powf(1.0 / theta) * r).ok_or("scaled r outside trajectory")?;
        worst = worst.max(rel(u, zeta * u1));
    }
    Ok((worst < SCALING_REL, format!("{SCALING_PAIRS} random pairs, max rel err {worst:.2e} (tol {SCALING_REL:e})")))
}

fn tail_limits() -> Outcome {
    let opts = SolverOptions::default();
    let spec = homogeneous(2.0, 0.0);
    let tab = spec.table();
    let r = 1e4;
    let mut regular = 0.0f64;
    for zeta in [1.0, 1e2, 1e4] {
        let sol = regular_solve(&spec, zeta, r, &opts).map_err(|e| e.to_string())?;
        let (u, _) = sol.eval(r).ok_or("r = 1e4 not reached")?;
        regular = regular.max(rel(r.powf(tab.theta) * u, tab.gamma));
    }
    let mut singular = 0.0f64;
    let mut approach = Vec::new();
    for mu in [0.0, 100.0] {
        let s = forced(mu);
        let star = singular_extend(&s, 1.0, &opts).map_err(|e| e.to_string())?;
        let first = star.solution.samples.first().ok_or("empty trajectory")?;
        singular = singular.max(rel(first.r.powf(tab.theta) * first.u, tab.gamma));
        if mu > 0.0 {
            for r in [1e-1, 1e-2, 1e-3, 1e-4] {
                let (u, _) = star.eval(r).ok_or("probe radius outside trajectory")?;
                approach.push(rel(r.powf(tab.theta) * u, tab.gamma));
            }
        }
    }
    let shrinking = approach.windows(2).all(|w| w[1] < w[0]);
    let ok = regular < REGULAR_TAIL_REL && singular < SINGULAR_TAIL_REL && shrinking;
    let approach: Vec<String> = approach.iter().map(|d| format!("{d:.1e}")).collect();
    Ok((
        ok,
        format!(
            "regular r^theta u at 1e4: {regular:.2e} (tol {REGULAR_TAIL_REL:e}); singular at deepest sample, mu in {{0, 100}}: {singular:.2e} (tol {SINGULAR_TAIL_REL:e}); mu = 100 deviation at r = 1e-1..1e-4: [{}]",
            approach.join(", ")
        ),
    ))
}

fn intersection_divergence() -> Outcome {
    let opts = SolverOptions::default();
    let zetas = [1e2, 1e3, 1e4, 1e5, 1e6];
    let below = intersection_growth(&homogeneous(2.0, 0.0), &zetas, 1.0, &opts).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = below.rows.iter().map(|r| r.count).collect();
    let nondecreasing = counts.windows(2).all(|w| w[1] >= w[0]);
    let reach = counts.iter().copied().max().unwrap_or(0) >= MIN_MAX_COUNT;
    let sigma1 = below.sigma.first().copied().ok_or("sigma sequence unavailable")?;
    let first_err = below.rows.iter().filter_map(|r| r.scaled.first().map(|s| rel(*s, sigma1))).fold(0.0, f64::max);
    let above = intersection_growth(&homogeneous(4.0, 0.0), &zetas, 1.0, &opts).map_err(|e| e.to_string())?;
    let above_counts: Vec<usize> = above.rows.iter().map(|r| r.count).collect();
    let ok = nondecreasing && reach && first_err < SIGMA_REL && above_counts.iter().all(|&c| c == 0);
    Ok((
        ok,
        format!(
            "p=2 counts {counts:?}, first crossing vs sigma1 = {sigma1:.6} within {first_err:.3} (tol {SIGMA_REL}); p=4 counts {above_counts:?}"
        ),
    ))
}

/// Rate of `Q = z'² + a z z' + (p−1)A^{p−1} z²` with `z = w − γ`, which obeys `Q' = −aQ`
/// for the linearized equation.
fn decay_rate() -> Outcome {
    let spec = homogeneous(2.0, 0.0);
    let tab = spec.table();
    let roots = tab.characteristic_roots();
    let expected = roots[0].re.abs();
    let opts = SolverOptions { rtol: 1e-12, atol: 1e-16, ..SolverOptions::default() };
    let sol = regular_solve(&spec, 1e6, 1e4, &opts).map_err(|e| e.to_string())?;
    let b = (spec.p - 1.0) * tab.a_pow();
    let q = |t: f64| {
        sol.weighted_at_t(t, tab.theta).map(|[w, dw]| {
            let z = w - tab.gamma;
            dw * dw + tab.a * z * dw + b * z * z
        })
    };
    let (lo, hi) = (1e-4 * tab.gamma.powi(2), 1e-12 * tab.gamma.powi(2));
    let ts: Vec<f64> = (0..=1200).map(|i| -7.0 + i as f64 * 0.01).collect();
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .filter_map(|&t| q(t).map(|v| (t, v)))
        .skip_while(|&(_, v)| v > lo)
        .take_while(|&(_, v)| v > hi)
        .map(|(t, v)| (t, v.ln()))
        .collect();
    if pts.len() < 20 {
        return Err(format!("only {} samples in the linear regime", pts.len()));
    }
    let n = pts.len() as f64;
    let (mt, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope =
        pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    let rate = -slope / 2.0;
    let e = rel(rate, expected);
    Ok((
        e < DECAY_RATE_REL,
        format!("measured rate {rate:.4} vs |Re lambda| = {expected} (rel {e:.2e}, tol {DECAY_RATE_REL})"),
    ))
}

fn far_field_contraction() -> Outcome {
    let spec = forced(100.0);
    // Wide enough that the start radius 10 is rejected at the top of the window.
    let window = (1.0, 1e12);
    let m = MatchingFunctions::new(&spec, 10.0, window).map_err(|e| e.to_string())?;
    let mut worst_ratio = 0.0f64;
    for eta in log_grid(window.0, window.1, 5) {
        worst_ratio = worst_ratio.max(m.solve(eta).map_err(|e| e.to_string())?.contraction);
    }
    let mut trip = 0.0f64;
    for eta0 in [20.0, 1e11] {
        let sol = fast_decay_solve(&spec, eta0, m.r1, m.max_iter).map_err(|e| e.to_string())?;
        let traj = sol.to_radial(&spec, sol.r1 * 1e4).map_err(|e| e.to_string())?;
        match eta_limit(&traj, sol.r1).map_err(|e| e.to_string())? {
            EtaLimit::Fast { eta, .. } => trip = trip.max(rel(eta, eta0)),
            other => return Err(format!("eta limit not fast at eta = {eta0}: {other:?}")),
        }
    }
    let slopes = m.v_slopes().map_err(|e| e.to_string())?;
    let min_slope = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let ok =
        worst_ratio <= CONTRACTION_LIMIT && trip < ETA_ROUND_TRIP_REL && slopes.len() == 5 && min_slope >= MIN_V_SLOPE;
    Ok((
        ok,
        format!(
            "auto R1 = {} from 10, max ratio {worst_ratio:.2e} (limit 1/3); eta round trip {trip:.1e} (tol {ETA_ROUND_TRIP_REL:e}); min V slope {min_slope:.3} over {} points (min {MIN_V_SLOPE})",
            m.r1,
            slopes.len()
        ),
    ))
}

fn energy_identity() -> Outcome {
    let spec = homogeneous(2.0, 0.0);
    let sol = regular_solve(&spec, 1.0, 1e6, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let rep = slow_decay_energy(&sol, 0.0, 13.0, 130).map_err(|e| e.to_string())?;
    let ok = rep.balance_error < ENERGY_BALANCE && rep.nonincreasing;
    Ok((
        ok,
        format!(
            "{} samples, max |E' + a w'^2| {:.2e} (tol {ENERGY_BALANCE:e}), nonincreasing: {}",
            rep.t.len(),
            rep.balance_error,
            rep.nonincreasing
        ),
    ))
}

fn mu_scan() -> Outcome {
    let spec = forced(0.0);
    let opts = ScanOptions::default();
    let c0 = classify_mu(&spec, 0.0, None, &opts).map_err(|e| e.to_string())?;
    let probe = positivity_probe(&spec, &opts).map_err(|e| e.to_string())?;
    let mu1 = find_mu1(&spec, 2.0 * probe, &opts).map_err(|e| e.to_string())?;
    let top = classify_mu(&spec, 2.0 * probe, None, &opts).map_err(|e| e.to_string())?;
    let width = mu1.hi - mu1.lo;
    let ok = c0.class.is_slow()
        && mu1.lo > 0.0
        && width <= MU1_WIDTH
        && mu1.class_lo.is_slow()
        && !mu1.class_hi.is_slow()
        && matches!(top.class, MuClass::PositivityFailure { .. });
    Ok((
        ok,
        format!(
            "mu=0: {}; mu1 in [{:.6}, {:.6}] (width {width:.1e}, tol {MU1_WIDTH:e}; {} below, {} above); mu = 2 x {probe}: {}",
            c0.class.label(),
            mu1.lo,
            mu1.hi,
            mu1.class_lo.label(),
            mu1.class_hi.label(),
            top.class.label()
        ),
    ))
}

fn census() -> Outcome {
    let base = forced(0.0);
    let opts = ScanOptions::default();
    let probe = positivity_probe(&base, &opts).map_err(|e| e.to_string())?;
    let mu1 = find_mu1(&base, 2.0 * probe, &opts).map_err(|e| e.to_string())?;
    let spec = base.with_mu(0.25 * (mu1.lo + mu1.hi));
    let grid = log_grid(10.0, 1e6, CENSUS_POINTS);
    let rep = bounded_solution_census(&spec, &grid, 1e4, 1.0, &opts.solver).map_err(|e| e.to_string())?;
    let brackets: Vec<String> = rep
        .increments
        .iter()
        .map(|i| format!("{}->{} in [{:.4e}, {:.4e}]", i.count_lo, i.count_hi, i.zeta_lo, i.zeta_hi))
        .collect();
    let recorded = rep.increments.iter().all(|i| i.zeta_lo < i.zeta_hi);
    let ok = rep.rows.len() == CENSUS_POINTS && rep.increments.len() >= MIN_INCREMENTS && recorded;
    Ok((
        ok,
        format!(
            "mu = {:.4}, {} increments (min {MIN_INCREMENTS}): {}",
            rep.mu,
            rep.increments.len(),
            brackets.join(", ")
        ),
    ))
}

fn cross_method() -> Outcome {
    let opts = SolverOptions::default();
    let mut worst = 0.0f64;
    for mu in [0.0, 5.0] {
        let spec = forced(mu);
        let gamma = spec.table().gamma;
        let theta = spec.table().theta;
        let picard = picard_singular_oracle(&spec, -30.0, 0.0, 0.0025, 60).map_err(|e| e.to_string())?;
        if !picard.converged {
            return Err(format!("Picard oracle did not converge at mu = {mu}"));
        }
        let star = singular_extend(&spec, 1.0, &opts).map_err(|e| e.to_string())?;
        for (&t, &z) in picard.t.iter().zip(&picard.z) {
            let w = star.solution.weighted_at_t(t, theta).ok_or("t outside forward trajectory")?[0];
            worst = worst.max((w - gamma - z).abs());
        }
    }
    Ok((
        worst < CROSS_METHOD_ABS,
        format!("mu in {{0, 5}}: max |w_forward - w_picard| {worst:.2e} (tol {CROSS_METHOD_ABS:e})"),
    ))
}

fn run_cli(args: &[&str], config: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_radial"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--force")
        .env_remove("RADIAL_OUT_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)));
    }
    Ok(())
}

/// File contents with the provenance timestamp removed.
fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut map = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = fs::read(&path).map_err(|e| e.to_string())?;
        if name == "provenance.json" {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
            v.as_object_mut().ok_or("provenance is not an object")?.remove("timestamp_unix");
            bytes = serde_json::to_vec(&v).map_err(|e| e.to_string())?;
        }
        map.insert(name, bytes);
    }
    Ok(map)
}

fn determinism() -> Outcome {
    let root = std::env::temp_dir().join(format!("radial-acceptance-{}", std::process::id()));
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let runs: [(&str, &str); 5] = [
        ("exponents", "homogeneous_p2.json"),
        ("solve", "homogeneous_p2.json"),
        ("intersections", "homogeneous_p2.json"),
        ("sweep-zeta", "homogeneous_p2.json"),
        ("scan-mu", "forced_scan.json"),
    ];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (cmd, cfg) in runs {
        let (a, b, c) = (root.join(format!("{cmd}-a")), root.join(format!("{cmd}-b")), root.join(format!("{cmd}-c")));
        run_cli(&[cmd], &configs.join(cfg), &a)?;
        run_cli(&[cmd, "--threads", "2"], &configs.join(cfg), &b)?;
        run_cli(&[cmd], &a.join("config.resolved.json"), &c)?;
        let (sa, sb, sc) = (snapshot(&a)?, snapshot(&b)?, snapshot(&c)?);
        compared += sa.len();
        if sa != sb {
            mismatches.push(format!("{cmd}: rerun differs"));
        }
        if sa != sc {
            mismatches.push(format!("{cmd}: run from resolved config differs"));
        }
    }
    let _ = fs::remove_dir_all(&root);
    let detail = if mismatches.is_empty() {
        format!("{compared} files identical across rerun, 2 threads and resolved-config replay")
    } else {
        mismatches.join("; ")
    };
    Ok((mismatches.is_empty(), detail))
}

fn main() -> ExitCode {
    let mut suite = Suite { passed: 0, failed: 0 };
    let start = Instant::now();
    println!("acceptance: radial solver");
    suite.check(1, "explicit singular solution", Some(EXPLICIT_BUDGET), explicit_singular_matches);
    suite.check(2, "exponent oracle", None, exponent_oracle);
    suite.check(3, "scaling law", Some(SCALING_BUDGET), scaling_law);
    suite.check(4, "tail limits", None, tail_limits);
    suite.check(5, "intersection divergence", Some(INTERSECTION_BUDGET), intersection_divergence);
    suite.check(6, "linearized decay rate", None, decay_rate);
    suite.check(7, "far-field contraction", None, far_field_contraction);
    suite.check(8, "energy identity", None, energy_identity);
    suite.check(9, "mu classification", Some(MU_SCAN_BUDGET), mu_scan);
    suite.check(10, "bounded-solution census", Some(CENSUS_BUDGET), census);
    suite.check(11, "cross-method singular agreement", None, cross_method);
    suite.check(12, "CLI determinism", None, determinism);
    println!("acceptance: {} passed, {} failed ({:.1} s)", suite.passed, suite.failed, start.elapsed().as_secs_f64());
    if suite.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
