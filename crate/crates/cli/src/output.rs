//! Output collector: serialized file writes, provenance and the result cache.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub const PROVENANCE_FILE: &str = "provenance.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    pub library_version: String,
    pub command: String,
    pub config_hash: String,
    /// Resolved configuration with every default filled in.
    pub config: RunConfig,
    pub inputs: Vec<FileRecord>,
    pub tolerances: Tolerances,
    pub files: Vec<FileRecord>,
    pub timestamp_unix: u64,
}

/// Hash of the command name, the canonical config and the contents of referenced tables.
pub fn config_hash(command: &str, config: &RunConfig, inputs: &[FileRecord]) -> String {
    let mut text = format!("{command}\n{}\n", config.canonical_json());
    for f in inputs {
        text.push_str(&format!("{} {}\n", f.name, f.sha256));
    }
    sha256_hex(text.as_bytes())
}

pub fn hash_inputs(paths: &[PathBuf]) -> Result<Vec<FileRecord>, CliError> {
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(FileRecord { name, sha256: sha256_hex(&bytes) })
        })
        .collect()
}

/// `true` when `dir` holds a finished run of the same command and config whose files are intact.
pub fn cache_hit(dir: &Path, command: &str, hash: &str) -> bool {
    let Ok(text) = fs::read_to_string(dir.join(PROVENANCE_FILE)) else {
        return false;
    };
    let Ok(prov) = serde_json::from_str::<Provenance>(&text) else {
        return false;
    };
    prov.command == command
        && prov.config_hash == hash
        && prov.tool_version == env!("CARGO_PKG_VERSION")
        && prov.files.iter().all(|f| fs::read(dir.join(&f.name)).is_ok_and(|b| sha256_hex(&b) == f.sha256))
}

/// Collects output files in memory and writes them in order once the run is complete.
#[derive(Debug)]
pub struct Collector {
    format: Format,
    files: Vec<(String, Vec<u8>)>,
}

impl Collector {
    pub fn new(format: Format) -> Self {
        Self { format, files: Vec::new() }
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        if self.format.json() {
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            self.add(name, text.into_bytes());
        }
        Ok(())
    }

    pub fn csv<F>(&mut self, name: &str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    {
        if self.format.csv() {
            let mut buf = Vec::new();
            write(&mut buf)?;
            self.add(name, buf);
        }
        Ok(())
    }

    /// Two-column whitespace-separated plot data with a `#` header.
    pub fn plot(&mut self, name: &str, header: (&str, &str), rows: impl IntoIterator<Item = (f64, f64)>) {
        let mut text = format!("# {} {}\n", header.0, header.1);
        for (x, y) in rows {
            text.push_str(&format!("{x:e} {y:e}\n"));
        }
        self.add(name, text.into_bytes());
    }

    #[cfg(test)]
    fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Writes every collected file, then the resolved config and the provenance block.
    pub fn finish(self, dir: &Path, mut prov: Provenance) -> Result<Provenance, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;
        let mut resolved = serde_json::to_string_pretty(&prov.config)?;
        resolved.push('\n');
        let mut all = self.files;
        all.push((RESOLVED_CONFIG_FILE.to_string(), resolved.into_bytes()));
        for (name, bytes) in &all {
            fs::write(dir.join(name), bytes)
                .map_err(|e| CliError::Output(format!("cannot write {}: {e}", dir.join(name).display())))?;
            prov.files.push(FileRecord { name: name.clone(), sha256: sha256_hex(bytes) });
        }
        prov.timestamp_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let mut text = serde_json::to_string_pretty(&prov)?;
        text.push('\n');
        fs::write(dir.join(PROVENANCE_FILE), text)?;
        Ok(prov)
    }
}
