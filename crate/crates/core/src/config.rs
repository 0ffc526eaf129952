//! Experiment configuration and its text file schema.
//!
//! The configuration file is TOML. Every section is optional and falls back to
//! the defaults below; lengths are meters, frequency is Hz, the seed is a u64.
//!
//! ```toml
//! frequency = 1.0e9
//! seed = 42
//!
//! [grid]
//! side_length = 0.15
//! n = 32
//!
//! [array]
//! radius = 0.12
//! count = 30
//!
//! [background]
//! eps_r = 23.0
//! sigma = 0.0
//!
//! [solver]
//! tol = 1e-6
//! max_iter = 2000
//! method = "bicgstab"      # or "cgnr"
//!
//! [phantom]                # see PhantomConfig
//! [training]               # see TrainConfig
//! [dbim]                   # see DbimConfig
//! [csi]                    # see CsiConfig
//! ```
//!
//! Any key can be overridden with a dotted path, e.g. `grid.n=64` or
//! `training.hidden_layers=[64,64,64]`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::ann::TrainConfig;
use crate::error::{Error, Result};
use crate::grid::{AntennaArray, Grid};
use crate::inversion::{CsiConfig, DbimConfig};
use crate::medium::{check_frequency, BackgroundMedium};
use crate::phantom::PhantomConfig;

/// Krylov method used for the forward domain equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KrylovMethod {
    /// Conjugate gradients on the normal equations.
    Cgnr,
    #[default]
    Bicgstab,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Relative residual target for the domain equation.
    pub tol: f64,
    pub max_iter: usize,
    pub method: KrylovMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-6,
            max_iter: 2000,
            method: KrylovMethod::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return Err(Error::invalid(format!(
                "solver tolerance must lie in (0, 1e-2], got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("solver max_iter must be positive"));
        }
        Ok(())
    }
}

/// Everything that defines the measurement physics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Operating frequency (Hz).
    pub frequency: f64,
    pub grid: Grid,
    pub array: AntennaArray,
    pub background: BackgroundMedium,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            frequency: 1e9,
            grid: Grid {
                side_length: 0.15,
                n: 32,
                origin: [0.0, 0.0],
            },
            array: AntennaArray {
                radius: 0.12,
                count: 30,
                start_angle: 0.0,
            },
            background: BackgroundMedium::default(),
            solver: SolverConfig::default(),
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    /// 108 x 108 cells over 15 cm, 30 antennas on a 12 cm circle, 1 GHz.
    pub fn full_scale() -> Self {
        let mut c = Self::default();
        c.grid.n = 108;
        c
    }

    pub fn validate(&self) -> Result<()> {
        check_frequency(self.frequency)?;
        self.grid.validate()?;
        self.array.validate()?;
        self.background.validate()?;
        self.solver.validate()
    }

    /// SHA-256 over the quantities that determine scattering data:
    /// frequency, grid, antenna layout and background.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"mwtomo-config-v1");
        h.update(self.frequency.to_le_bytes());
        h.update(self.grid.side_length.to_le_bytes());
        h.update((self.grid.n as u64).to_le_bytes());
        h.update(self.grid.origin[0].to_le_bytes());
        h.update(self.grid.origin[1].to_le_bytes());
        h.update(self.array.radius.to_le_bytes());
        h.update((self.array.count as u64).to_le_bytes());
        h.update(self.array.start_angle.to_le_bytes());
        h.update(self.background.eps_r.to_le_bytes());
        h.update(self.background.sigma.to_le_bytes());
        h.finalize().into()
    }
}

/// Full configuration file: physics plus per-stage settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub phantom: PhantomConfig,
    pub training: TrainConfig,
    pub dbim: DbimConfig,
    pub csi: CsiConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let mut value: toml::Table = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
        merge(&mut value, user);
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: RunConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        self.phantom.validate()?;
        self.training.validate()?;
        self.dbim.validate()?;
        self.csi.validate()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Recursively overlay `top` onto `base`; tables merge, everything else replaces.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Apply a `dotted.key=value` override. The value is parsed as a TOML value,
/// falling back to a bare string.
fn apply_override(root: &mut toml::Table, entry: &str) -> Result<()> {
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("override `{entry}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = parse_value(raw);
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Parse(format!("bad override key `{key}`")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("override `{key}`: `{part}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.experiment.background.eps_r, 23.0);
        assert_eq!(c.experiment.array.count, 30);
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::from_toml_str(
            "frequency = 2e9\n[grid]\nn = 16\n",
            &["grid.n=24".into(), "solver.method=cgnr".into(), "seed=7".into()],
        )
        .unwrap();
        assert_eq!(c.experiment.frequency, 2e9);
        assert_eq!(c.experiment.grid.n, 24);
        assert_eq!(c.experiment.grid.side_length, 0.15);
        assert_eq!(c.experiment.solver.method, KrylovMethod::Cgnr);
        assert_eq!(c.experiment.seed, 7);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml_str("frequency = -1.0", &[]).is_err());
        assert!(RunConfig::from_toml_str("[grid]\nn = 4", &[]).is_err());
        assert!(RunConfig::from_toml_str("", &["nokey".into()]).is_err());
    }

    #[test]
    fn round_trips_through_text() {
        let mut c = RunConfig::default();
        c.experiment.grid.n = 40;
        let back = RunConfig::from_toml_str(&c.to_toml_string(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn fingerprint_tracks_physics() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 99;
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.background.eps_r = 10.0;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
