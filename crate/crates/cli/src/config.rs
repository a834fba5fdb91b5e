//! Run configuration: a strict JSON document with `problem`, `solver`, `task` and `output` blocks.

use std::fs;
use std::path::{Path, PathBuf};

use radial::muscan::{log_grid, ScanOptions};
use radial::{CoefficientProfile, ForcingProfile, ProblemSpec, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub problem: ProblemBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub task: TaskBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub n: u32,
    pub p: f64,
    pub k: KSource,
    #[serde(default = "zero_forcing")]
    pub f: FSource,
    #[serde(default)]
    pub mu: f64,
}

fn zero_forcing() -> FSource {
    FSource::Inline(ForcingProfile::Zero)
}

/// An inline coefficient profile, or a two-column CSV table with its asymptotic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSource {
    Inline(CoefficientProfile),
    Csv(KTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KTable {
    pub csv: PathBuf,
    pub alpha: f64,
    pub k0: f64,
    pub beta: f64,
    pub k_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FSource {
    Inline(ForcingProfile),
    Csv(FTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FTable {
    pub csv: PathBuf,
    pub nu: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub rtol: f64,
    pub atol: f64,
    pub max_dt: f64,
    pub max_steps: usize,
    pub t_start: f64,
    pub stop_at_zero: bool,
    pub r_max: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            rtol: o.rtol,
            atol: o.atol,
            max_dt: o.max_dt,
            max_steps: o.max_steps,
            t_start: o.t_start,
            stop_at_zero: o.stop_at_zero,
            r_max: 1e4,
        }
    }
}

impl SolverBlock {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            rtol: self.rtol,
            atol: self.atol,
            max_dt: self.max_dt,
            max_steps: self.max_steps,
            t_start: self.t_start,
            stop_at_zero: self.stop_at_zero,
        }
    }
}

/// Parameters read by the individual subcommands; each ignores the ones it does not use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskBlock {
    /// Initial value for `solve`.
    pub zeta: f64,
    /// Explicit ζ list; overrides the log grid below.
    pub zetas: Option<Vec<f64>>,
    pub zeta_lo: f64,
    pub zeta_hi: f64,
    pub zeta_n: usize,
    /// Intersection interval `(0, rho)`.
    pub rho: f64,
    /// Radius up to which census solutions are followed.
    pub r_budget: f64,
    /// Number of μ grid points for `scan-mu`.
    pub grid_n: usize,
    pub r1: f64,
    pub r_far: f64,
    pub probe_radius: f64,
    pub mu_tol: f64,
    pub h_threshold: f64,
    /// When set, `census` runs at this fraction of the located μ₁ instead of `problem.mu`.
    pub mu_over_mu1: Option<f64>,
}

impl Default for TaskBlock {
    fn default() -> Self {
        let s = ScanOptions::default();
        Self {
            zeta: 1.0,
            zetas: None,
            zeta_lo: 1e2,
            zeta_hi: 1e6,
            zeta_n: 5,
            rho: 1.0,
            r_budget: 1e4,
            grid_n: 33,
            r1: s.r1,
            r_far: s.r_far,
            probe_radius: s.probe_radius,
            mu_tol: s.mu_tol,
            h_threshold: s.h_threshold,
            mu_over_mu1: None,
        }
    }
}

impl TaskBlock {
    pub fn zeta_grid(&self) -> Vec<f64> {
        match &self.zetas {
            Some(z) => z.clone(),
            None => log_grid(self.zeta_lo, self.zeta_hi, self.zeta_n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "both")]
    pub format: Format,
}

fn both() -> Format {
    Format::Both
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: None, format: Format::Both }
    }
}

/// A parsed configuration together with the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// Canonical JSON of everything that determines the emitted files (the output directory is excluded).
    pub fn canonical_json(&self) -> String {
        let hashed = serde_json::json!({
            "version": self.version,
            "problem": self.problem,
            "solver": self.solver,
            "task": self.task,
            "format": self.output.format,
        });
        serde_json::to_string(&hashed).expect("config serializes")
    }
}

impl LoadedConfig {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = RunConfig::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Rewrites table paths so the config no longer depends on its own location.
    pub fn absolutize_inputs(&mut self) {
        let abs = |p: PathBuf| fs::canonicalize(&p).unwrap_or(p);
        if let KSource::Csv(t) = &self.config.problem.k {
            let p = abs(self.resolve(&t.csv));
            if let KSource::Csv(t) = &mut self.config.problem.k {
                t.csv = p;
            }
        }
        if let FSource::Csv(t) = &self.config.problem.f {
            let p = abs(self.resolve(&t.csv));
            if let FSource::Csv(t) = &mut self.config.problem.f {
                t.csv = p;
            }
        }
    }

    /// Tables referenced by the problem block, in the order `k`, `f`.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut v = Vec::new();
        if let KSource::Csv(t) = &self.config.problem.k {
            v.push(self.resolve(&t.csv));
        }
        if let FSource::Csv(t) = &self.config.problem.f {
            v.push(self.resolve(&t.csv));
        }
        v
    }

    pub fn coefficient(&self) -> Result<CoefficientProfile, CliError> {
        match &self.config.problem.k {
            KSource::Inline(k) => Ok(k.clone()),
            KSource::Csv(t) => {
                let file = open(&self.resolve(&t.csv))?;
                Ok(CoefficientProfile::tabulated_from_csv(file, t.alpha, t.k0, t.beta, t.k_inf)?)
            }
        }
    }

    pub fn forcing(&self) -> Result<ForcingProfile, CliError> {
        match &self.config.problem.f {
            FSource::Inline(f) => Ok(f.clone()),
            FSource::Csv(t) => {
                let file = open(&self.resolve(&t.csv))?;
                Ok(ForcingProfile::tabulated_from_csv(file, t.nu, t.q)?)
            }
        }
    }

    pub fn spec(&self) -> Result<ProblemSpec, CliError> {
        let pb = &self.config.problem;
        Ok(ProblemSpec::new(pb.n, pb.p, self.coefficient()?, self.forcing()?, pb.mu)?)
    }

    pub fn solver(&self) -> Result<SolverOptions, CliError> {
        let o = self.config.solver.options();
        o.validate()?;
        if self.config.solver.r_max.is_nan() || self.config.solver.r_max <= 0.0 {
            return Err(CliError::Config("solver.r_max must be positive".into()));
        }
        Ok(o)
    }

    pub fn scan(&self) -> Result<ScanOptions, CliError> {
        let t = &self.config.task;
        Ok(ScanOptions {
            solver: self.solver()?,
            r1: t.r1,
            r_far: t.r_far,
            probe_radius: t.probe_radius,
            mu_tol: t.mu_tol,
            h_threshold: t.h_threshold,
        })
    }
}

fn open(path: &Path) -> Result<fs::File, CliError> {
    fs::File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"version": 1, "problem": {"n": 13, "p": 2.0, "k": {"kind": "pure_power", "alpha": 0.0, "k0": 1.0}}}"#;

    #[test]
    fn defaults_fill_missing_blocks() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.solver, SolverBlock::default());
        assert_eq!(cfg.task, TaskBlock::default());
        assert_eq!(cfg.output.format, Format::Both);
        assert_eq!(cfg.problem.f, FSource::Inline(ForcingProfile::Zero));
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let text = "{\"version\": 1,\n \"problem\": {\"n\": 13, \"p\": 2.0, \"k\": {\"kind\": \"pure_power\", \"alpha\": 0.0, \"k0\": 1.0}},\n \"solver\": {\"rtoll\": 1e-9}}";
        let err = RunConfig::from_json(text).unwrap_err().to_string();
        assert!(err.contains("rtoll") && err.contains("line 3"), "{err}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = MINIMAL.replace("\"version\": 1", "\"version\": 7");
        assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn csv_coefficient_source_parses() {
        let text = MINIMAL.replace(
            r#"{"kind": "pure_power", "alpha": 0.0, "k0": 1.0}"#,
            r#"{"csv": "k.csv", "alpha": 0.0, "k0": 1.0, "beta": 0.0, "k_inf": 1.0}"#,
        );
        let cfg = RunConfig::from_json(&text).unwrap();
        assert!(matches!(cfg.problem.k, KSource::Csv(_)));
    }

    #[test]
    fn canonical_json_ignores_output_dir_only() {
        let mut a = RunConfig::from_json(MINIMAL).unwrap();
        let b = a.clone();
        a.output.dir = Some("elsewhere".into());
        assert_eq!(a.canonical_json(), b.canonical_json());
        a.output.format = Format::Csv;
        assert_ne!(a.canonical_json(), b.canonical_json());
    }

    #[test]
    fn zeta_grid_prefers_explicit_list() {
        let mut t = TaskBlock::default();
        assert_eq!(t.zeta_grid().len(), 5);
        t.zetas = Some(vec![3.0, 4.0]);
        assert_eq!(t.zeta_grid(), vec![3.0, 4.0]);
    }
}
