use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use radial::shooting::{read_samples_csv, write_samples_csv};
use radial::RadialSolution;
use serde_json::Value;
use tempfile::TempDir;

const HOMOGENEOUS: &str = r#"{
  "version": 1,
  "problem": {"n": 13, "p": 2.0, "k": {"kind": "pure_power", "alpha": 0.0, "k0": 1.0}},
  "solver": {"r_max": 1e4},
  "task": {"zeta": 1.0}
}"#;

fn forced(mu: f64) -> String {
    format!(
        r#"{{"version": 1,
  "problem": {{"n": 13, "p": 2.0, "k": {{"kind": "pure_power", "alpha": 0.0, "k0": 1.0}},
    "f": {{"kind": "power_decay_bump", "nu": 0.0, "q": 14.0, "amplitude": 1.0}}, "mu": {mu:?}}},
  "solver": {{"r_max": 10.0}}}}"#
    )
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, args: &[&str], config: &Path, out: Option<&Path>) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_radial"));
        cmd.args(args).arg("--config").arg(config).env_remove("RADIAL_OUT_DIR").current_dir(self.dir.path());
        if let Some(o) = out {
            cmd.arg("--out").arg(o);
        }
        cmd.output().unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exponents_report_for_the_canonical_pair() {
    let fx = Fixture::new();
    let cfg = fx.config("c.json", HOMOGENEOUS);
    let out = fx.path("out");
    let o = fx.run(&["exponents"], &cfg, Some(&out));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out.join("exponents.json"));
    assert!((v["table"]["p_s_alpha"].as_f64().unwrap() - 15.0 / 11.0).abs() < 1e-15);
    assert!((v["table"]["p_jl_alpha"].as_f64().unwrap() - 2.9307).abs() < 1e-4);
    assert_eq!(v["regime"]["below_jl"], Value::Bool(true));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("p_JL(alpha)") && l.contains("2.9306913")));
}

#[test]
fn infinite_jl_exponent_is_rendered_as_inf() {
    let fx = Fixture::new();
    let cfg = fx.config("c.json", &HOMOGENEOUS.replace("\"n\": 13", "\"n\": 10"));
    let out = fx.path("out");
    assert_eq!(code(&fx.run(&["exponents"], &cfg, Some(&out))), 0);
    assert_eq!(json(&out.join("exponents.json"))["table"]["p_jl_alpha"], Value::String("inf".into()));
    let text = fs::read_to_string(out.join("exponents.txt")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("p_JL(alpha)") && l.ends_with("inf")));
}

#[test]
fn config_errors_exit_with_two() {
    let fx = Fixture::new();
    let out = fx.path("out");
    let n2 = fx.config("n2.json", &HOMOGENEOUS.replace("\"n\": 13", "\"n\": 2"));
    assert_eq!(code(&fx.run(&["exponents"], &n2, Some(&out))), 2);
    assert_eq!(code(&fx.run(&["solve"], &fx.path("missing.json"), Some(&out))), 2);
    let typo = fx.config("typo.json", &HOMOGENEOUS.replace("\"r_max\"", "\"rmax\""));
    let o = fx.run(&["solve"], &typo, Some(&out));
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("rmax") && err.contains("line 4"), "{err}");
    let version = fx.config("v.json", &HOMOGENEOUS.replace("\"version\": 1", "\"version\": 2"));
    assert_eq!(code(&fx.run(&["solve"], &version, Some(&out))), 2);
    assert!(!out.exists());
}

#[test]
fn solver_failure_and_budget_have_distinct_codes() {
    let fx = Fixture::new();
    let big = fx.config("big.json", &forced(1e6));
    assert_eq!(code(&fx.run(&["intersections"], &big, Some(&fx.path("a")))), 3);
    let steps = fx.config("steps.json", &HOMOGENEOUS.replace("\"r_max\": 1e4", "\"r_max\": 1e4, \"max_steps\": 10"));
    let o = fx.run(&["solve"], &steps, Some(&fx.path("b")));
    assert_eq!(code(&o), 4);
    let v = json(&fx.path("b").join("trajectory.json"));
    assert_eq!(v["termination"]["kind"], Value::String("step_budget".into()));
}

#[test]
fn solve_writes_increasing_radii() {
    let fx = Fixture::new();
    let cfg = fx.config("c.json", HOMOGENEOUS);
    let out = fx.path("out");
    assert_eq!(code(&fx.run(&["solve"], &cfg, Some(&out))), 0);
    let samples = read_samples_csv(fs::File::open(out.join("trajectory.csv")).unwrap()).unwrap();
    assert!(samples.len() > 10);
    assert!(samples.windows(2).all(|w| w[1].r > w[0].r));
    let plot = fs::read_to_string(out.join("u_vs_r.dat")).unwrap();
    assert!(plot.starts_with("# r u\n"));
    assert_eq!(plot.lines().count(), samples.len() + 1);
}

#[test]
fn hit_zero_is_reported_with_its_radius() {
    let fx = Fixture::new();
    let cfg = fx.config("c.json", &forced(1e6));
    let out = fx.path("out");
    assert_eq!(code(&fx.run(&["solve"], &cfg, Some(&out))), 0);
    let v = json(&out.join("trajectory.json"));
    assert_eq!(v["termination"]["kind"], Value::String("hit_zero".into()));
    let r0 = v["termination"]["r0"].as_f64().unwrap();
    assert!(r0 > 0.0 && r0 < 10.0);
}

#[test]
fn emitted_trajectories_round_trip() {
    let fx = Fixture::new();
    let cfg = fx.config("c.json", HOMOGENEOUS);
    let out = fx.path("out");
    assert_eq!(code(&fx.run(&["singular"], &cfg, Some(&out))), 0);
    let bytes = fs::read(out.join("singular.csv")).unwrap();
    let mut again = Vec::new();
    write_samples_csv(&read_samples_csv(bytes.as_slice()).unwrap(), &mut again).unwrap();
    assert_eq!(bytes, again);

    assert_eq!(code(&fx.run(&["solve"], &cfg, Some(&out))), 0);
    let text = fs::read_to_string(out.join("trajectory.json")).unwrap();
    let sol: RadialSolution = serde_json::from_str(&text).unwrap();
    assert_eq!(sol.to_json().unwrap() + "\n", text);
}

#[test]
fn cache_hits_skip_work_unless_forced() {
    let fx = Fixture::new();
    let cfg = fx.config("c.json", HOMOGENEOUS);
    let out = fx.path("out");
    assert_eq!(code(&fx.run(&["solve"], &cfg, Some(&out))), 0);
    let prov = fs::read(out.join("provenance.json")).unwrap();

    let o = fx.run(&["solve"], &cfg, Some(&out));
    assert!(String::from_utf8(o.stdout).unwrap().contains("cached"));
    assert_eq!(fs::read(out.join("provenance.json")).unwrap(), prov);

    let o = fx.run(&["solve", "--force"], &cfg, Some(&out));
    assert!(!String::from_utf8(o.stdout).unwrap().contains("cached"));

    // A different command or a damaged output file invalidates the cache.
    let o = fx.run(&["singular"], &cfg, Some(&out));
    assert!(!String::from_utf8(o.stdout).unwrap().contains("cached"));
    fs::write(out.join("singular.csv"), "r,u,du\n").unwrap();
    let o = fx.run(&["singular"], &cfg, Some(&out));
    assert!(!String::from_utf8(o.stdout).unwrap().contains("cached"));
}

#[test]
fn output_dir_precedence_is_flag_then_env_then_config() {
    let fx = Fixture::new();
    let text = HOMOGENEOUS.replace("\"task\"", "\"output\": {\"dir\": \"from-config\"},\n  \"task\"");
    let cfg = fx.config("c.json", &text);
    let bin = env!("CARGO_BIN_EXE_radial");
    let run = |env: Option<&Path>, flag: Option<&Path>| {
        let mut cmd = Command::new(bin);
        cmd.arg("exponents").arg("--config").arg(&cfg).env_remove("RADIAL_OUT_DIR");
        if let Some(e) = env {
            cmd.env("RADIAL_OUT_DIR", e);
        }
        if let Some(f) = flag {
            cmd.arg("--out").arg(f);
        }
        assert!(cmd.output().unwrap().status.success());
    };
    run(None, None);
    assert!(fx.path("from-config/exponents.json").exists());
    run(Some(&fx.path("from-env")), None);
    assert!(fx.path("from-env/exponents.json").exists());
    run(Some(&fx.path("from-env-2")), Some(&fx.path("from-flag")));
    assert!(fx.path("from-flag/exponents.json").exists());
    assert!(!fx.path("from-env-2").exists());
}

#[test]
fn format_selects_csv_or_json() {
    let fx = Fixture::new();
    let cfg = fx.config("c.json", HOMOGENEOUS);
    let (a, b) = (fx.path("csv"), fx.path("json"));
    assert_eq!(code(&fx.run(&["solve", "--format", "csv"], &cfg, Some(&a))), 0);
    assert!(a.join("trajectory.csv").exists() && !a.join("trajectory.json").exists());
    assert_eq!(code(&fx.run(&["solve", "--format", "json"], &cfg, Some(&b))), 0);
    assert!(!b.join("trajectory.csv").exists() && b.join("trajectory.json").exists());
    assert!(a.join("u_vs_r.dat").exists() && b.join("u_vs_r.dat").exists());
}

#[test]
fn provenance_records_defaults_and_file_hashes() {
    let fx = Fixture::new();
    let cfg = fx.config("c.json", HOMOGENEOUS);
    let out = fx.path("out");
    assert_eq!(code(&fx.run(&["intersections"], &cfg, Some(&out))), 0);
    let prov = json(&out.join("provenance.json"));
    assert_eq!(prov["command"], Value::String("intersections".into()));
    assert_eq!(prov["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(prov["config"]["task"]["zeta_n"], Value::from(5));
    assert_eq!(prov["config"]["solver"]["rtol"].as_f64(), Some(1e-10));
    assert_eq!(prov["tolerances"]["atol"].as_f64(), Some(1e-12));
    for f in prov["files"].as_array().unwrap() {
        let bytes = fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        let digest: String =
            <sha2::Sha256 as sha2::Digest>::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"].as_str().unwrap(), digest);
    }
    let counts: Vec<u64> = fs::read_to_string(out.join("intersections.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(counts.windows(2).all(|w| w[1] >= w[0]), "{counts:?}");
}

#[test]
fn tabulated_coefficient_from_csv() {
    let fx = Fixture::new();
    let rows: String = (0..=40).map(|i| format!("{:e},1\n", 10f64.powf(-4.0 + 0.2 * i as f64))).collect();
    fs::write(fx.path("k.csv"), format!("r,k\n{rows}")).unwrap();
    let text = HOMOGENEOUS.replace(
        r#"{"kind": "pure_power", "alpha": 0.0, "k0": 1.0}"#,
        r#"{"csv": "k.csv", "alpha": 0.0, "k0": 1.0, "beta": 0.0, "k_inf": 1.0}"#,
    );
    let cfg = fx.config("c.json", &text);
    let (tab, pure) = (fx.path("tab"), fx.path("pure"));
    assert_eq!(code(&fx.run(&["solve"], &cfg, Some(&tab))), 0);
    assert_eq!(code(&fx.run(&["solve"], &fx.config("p.json", HOMOGENEOUS), Some(&pure))), 0);
    let a = read_samples_csv(fs::File::open(tab.join("trajectory.csv")).unwrap()).unwrap();
    let b = read_samples_csv(fs::File::open(pure.join("trajectory.csv")).unwrap()).unwrap();
    let (ua, ub) = (a.last().unwrap().u, b.last().unwrap().u);
    assert!((ua / ub - 1.0).abs() < 1e-8, "{ua} vs {ub}");
    let prov = json(&tab.join("provenance.json"));
    assert_eq!(prov["inputs"][0]["name"], Value::String("k.csv".into()));
}

#[test]
fn scan_reports_mu1_interval() {
    let fx = Fixture::new();
    let cfg = fx.config("c.json", &forced(0.0).replace("\"solver\": {\"r_max\": 10.0}", "\"task\": {\"grid_n\": 9}"));
    let out = fx.path("out");
    let o = fx.run(&["scan-mu"], &cfg, Some(&out));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out.join("scan.json"));
    let mu1 = v["mu1_estimate"].as_array().unwrap();
    let (lo, hi) = (mu1[0].as_f64().unwrap(), mu1[1].as_f64().unwrap());
    assert!(lo > 0.0 && hi > lo && hi - lo <= 1e-3);
    let classes = fs::read_to_string(out.join("class_vs_mu.dat")).unwrap();
    assert_eq!(classes.lines().count(), 10);
    assert!(out.join("h_vs_mu.dat").exists());
}
