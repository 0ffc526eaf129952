//! Machine-readable record of one command invocation.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    arguments: Vec<String>,
    version: String,
    seconds: f64,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
    config: toml::Table,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Collects the files a command reads and writes.
#[derive(Debug, Default)]
pub struct RunLog {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunLog {
    pub fn input(&mut self, p: impl Into<PathBuf>) {
        self.inputs.push(p.into());
    }

    pub fn output(&mut self, p: impl Into<PathBuf>) {
        self.outputs.push(p.into());
    }

    pub fn outputs<I: IntoIterator<Item = PathBuf>>(&mut self, ps: I) {
        self.outputs.extend(ps);
    }

    /// Write `run.toml` into `dir`.
    pub fn write(&self, dir: &Path, command: &str, config: &mwtomo::config::RunConfig, seconds: f64) -> Result<PathBuf> {
        let entries = |ps: &[PathBuf]| -> Result<Vec<FileEntry>> {
            ps.iter()
                .filter(|p| p.is_file())
                .map(|p| {
                    Ok(FileEntry {
                        path: p.display().to_string(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let m = Manifest {
            command: command.to_string(),
            arguments: std::env::args().skip(1).collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seconds,
            inputs: entries(&self.inputs)?,
            outputs: entries(&self.outputs)?,
            config: toml::Table::try_from(config).context("serializing configuration")?,
        };
        let path = dir.join("run.toml");
        std::fs::write(&path, toml::to_string_pretty(&m)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
