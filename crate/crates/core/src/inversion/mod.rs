//! Classical iterative baselines: single-step Born, DBIM and CSI.

mod csi;
mod dbim;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::forward::{ForwardModel, ScatteringMatrix};
use crate::medium::{contrast_of, DielectricMap};

pub use csi::csi_invert;
pub use dbim::{born_invert, dbim_invert, estimate_lambda};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    /// Contrast zero everywhere.
    Background,
    /// Back-propagated contrast sources and their least-squares contrast.
    BackPropagation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbimConfig {
    /// Outer (linearise-and-update) iterations.
    pub iterations: usize,
    /// CGLS iterations for each regularised linear problem.
    pub inner_iterations: usize,
    /// Tikhonov weight relative to the largest singular value of the Born operator.
    pub reg_factor: f64,
    /// Absolute Tikhonov weight; overrides `reg_factor` when set.
    pub lambda: Option<f64>,
    pub power_iterations: usize,
    pub max_halvings: usize,
    pub initial_guess: InitialGuess,
    pub projection: bool,
}

impl Default for DbimConfig {
    fn default() -> Self {
        DbimConfig {
            iterations: 15,
            inner_iterations: 30,
            reg_factor: 1e-2,
            lambda: None,
            power_iterations: 20,
            max_halvings: 5,
            initial_guess: InitialGuess::Background,
            projection: true,
        }
    }
}

impl DbimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.inner_iterations == 0 || self.power_iterations == 0 {
            return Err(Error::invalid("dbim iteration counts must be >= 1"));
        }
        let lambda_ok = match self.lambda {
            Some(l) => l > 0.0 && l.is_finite(),
            None => self.reg_factor > 0.0 && self.reg_factor.is_finite(),
        };
        if !lambda_ok {
            return Err(Error::invalid("dbim regularisation weight must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsiConfig {
    pub iterations: usize,
    pub initial_guess: InitialGuess,
    pub projection: bool,
    /// Contrast-update step halvings tried before keeping the old contrast.
    pub max_halvings: usize,
}

impl Default for CsiConfig {
    fn default() -> Self {
        CsiConfig {
            iterations: 512,
            initial_guess: InitialGuess::BackPropagation,
            projection: true,
            max_halvings: 8,
        }
    }
}

impl CsiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("csi iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Estimate plus convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult {
    pub estimate: DielectricMap,
    /// `||S_model - S_meas|| / ||S_meas||` after each iteration.
    pub residuals: Vec<f64>,
    /// CSI cost functional after each iteration (empty for DBIM/Born).
    pub functional: Vec<f64>,
    pub iterations: usize,
    pub seconds: f64,
    /// Tikhonov weight used (DBIM/Born).
    pub lambda: Option<f64>,
}

impl InversionResult {
    pub fn residual_csv(&self) -> String {
        let mut s = String::from("iteration,data_residual");
        if !self.functional.is_empty() {
            s.push_str(",functional");
        }
        s.push('\n');
        for (i, r) in self.residuals.iter().enumerate() {
            let _ = write!(s, "{},{r:.12e}", i + 1);
            if let Some(f) = self.functional.get(i) {
                let _ = write!(s, ",{f:.12e}");
            }
            s.push('\n');
        }
        s
    }
}

fn check_data(model: &ForwardModel, s: &ScatteringMatrix) -> Result<()> {
    if s.fingerprint != model.config.fingerprint() {
        return Err(Error::ConfigMismatch(
            "scattering data were produced with a different frequency, grid, array or background".into(),
        ));
    }
    if s.values.dim() != (model.n_views(), model.n_receivers()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", model.n_views(), model.n_receivers()),
            found: format!("{:?}", s.values.dim()),
        });
    }
    if !s.is_finite() {
        return Err(Error::invalid("measured data contain non-finite values"));
    }
    Ok(())
}

/// Project a flat contrast onto `eps_r >= 1`, `sigma >= 0`.
fn project(model: &ForwardModel, chi: &[C]) -> Vec<C> {
    let grid = model.grid();
    let cfg = &model.config;
    let eps_b = cfg.background.permittivity(cfg.frequency).expect("validated background");
    let eps = Array2::from_shape_vec(grid.shape(), chi.iter().map(|c| (c + 1.0) * eps_b).collect()).expect("shape");
    let map = DielectricMap::from_complex_projected(grid, &eps, cfg.frequency);
    let projected = contrast_of(&map, &cfg.background, cfg.frequency).expect("projected map is valid");
    projected.chi.into_raw_vec_and_offset().0
}

fn to_map(model: &ForwardModel, chi: &[C]) -> DielectricMap {
    let grid = model.grid();
    let cfg = &model.config;
    let eps_b = cfg.background.permittivity(cfg.frequency).expect("validated background");
    let eps = Array2::from_shape_vec(grid.shape(), chi.iter().map(|c| (c + 1.0) * eps_b).collect()).expect("shape");
    DielectricMap::from_complex_projected(grid, &eps, cfg.frequency)
}

fn rows(s: &ScatteringMatrix) -> Vec<Vec<C>> {
    s.values.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn relative_residual(model: &ScatteringMatrix, meas: &ScatteringMatrix) -> f64 {
    let num: f64 = model
        .values
        .iter()
        .zip(meas.values.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    (num / meas.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}
