//! `radial`: batch runs of the radial solver driven by a JSON config.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use crate::commands::Command;
use crate::config::{Format, LoadedConfig};
use crate::error::CliError;
use crate::output::{cache_hit, config_hash, hash_inputs, Collector, Provenance, Tolerances};

#[derive(Debug, Parser)]
#[command(name = "radial", version, about = "Positive radial solutions of Δu + K(|x|)u^p + μf(|x|) = 0")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's `output.dir`.
    #[arg(long, global = true, value_name = "DIR", env = "RADIAL_OUT_DIR")]
    out: Option<PathBuf>,

    /// Recompute even when the output directory holds a matching run.
    #[arg(long, global = true)]
    force: bool,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Overrides the config's `output.format`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

const DEFAULT_OUT_DIR: &str = "radial-out";

fn run(cli: Cli) -> anyhow::Result<()> {
    let path = cli.config.ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut loaded = LoadedConfig::read(&path)?;
    if let Some(f) = cli.format {
        loaded.config.output.format = f;
    }
    let dir = cli
        .out
        .or_else(|| loaded.config.output.dir.as_ref().map(|d| loaded.resolve(d)))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    loaded.config.output.dir = None;
    loaded.absolutize_inputs();

    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
    }

    let name = cli.command.name();
    let inputs = hash_inputs(&loaded.input_files())?;
    let hash = config_hash(name, &loaded.config, &inputs);
    if !cli.force && cache_hit(&dir, name, &hash) {
        println!("{name}: cached result in {} (use --force to recompute)", dir.display());
        return Ok(());
    }

    let mut out = Collector::new(loaded.config.output.format);
    let outcome = commands::run(cli.command, &loaded, &mut out)?;
    let s = &loaded.config.solver;
    let prov = Provenance {
        tool: "radial".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        library_version: radial::VERSION.into(),
        command: name.into(),
        config_hash: hash,
        config: loaded.config.clone(),
        inputs,
        tolerances: Tolerances { rtol: s.rtol, atol: s.atol, max_dt: s.max_dt },
        files: Vec::new(),
        timestamp_unix: 0,
    };
    let prov = out.finish(&dir, prov).with_context(|| format!("writing results to {}", dir.display()))?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("{name}: wrote {} files to {}", prov.files.len() + 1, dir.display());
    match outcome.failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<CliError>() {
                Some(c) => c.exit_code(),
                None => ExitCode::from(3),
            }
        }
    }
}
