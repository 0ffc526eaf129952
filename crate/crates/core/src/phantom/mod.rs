//! Random 2D breast phantoms.
//!
//! Pipeline: ellipse geometry with a skin band, a power-law random field
//! segmented by quantiles into adipose / transitional / fibro-glandular tissue
//! at class-dependent proportions, truncated-normal dielectrics with per-pixel
//! jitter, then a masked Gaussian blur of the inner tissue.

mod dielectric;
mod field;
mod geometry;
mod io;
mod segment;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::medium::{BackgroundMedium, DielectricMap};
use crate::rng::{self, Rng};

pub use dielectric::{assign_dielectrics, smooth_correlate, NormalSpec, TissueDielectricStats, TissueStats};
pub use field::multifractal_field;
pub use geometry::{sample_geometry, BreastGeometry, AXIS_RANGE, CENTER_RADIUS, SKIN_RANGE};
pub use io::{export_phantom, import_external_phantom, labels_from_dielectrics, IMPORT_THRESHOLDS};
pub use segment::{draw_target_percentages, segment_tissues, TissueLabelMap};

/// Tissue codes stored in label rasters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Tissue {
    Background = 0,
    Skin = 1,
    Adipose = 2,
    Transitional = 3,
    Fibroglandular = 4,
}

impl Tissue {
    pub const INNER: [Tissue; 3] = [Tissue::Adipose, Tissue::Transitional, Tissue::Fibroglandular];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Tissue> {
        Some(match code {
            0 => Tissue::Background,
            1 => Tissue::Skin,
            2 => Tissue::Adipose,
            3 => Tissue::Transitional,
            4 => Tissue::Fibroglandular,
            _ => return None,
        })
    }

    pub fn is_inner(self) -> bool {
        matches!(self, Tissue::Adipose | Tissue::Transitional | Tissue::Fibroglandular)
    }
}

/// Breast density class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BreastClass {
    I,
    II,
    III,
    IV,
}

impl BreastClass {
    pub const ALL: [BreastClass; 4] = [BreastClass::I, BreastClass::II, BreastClass::III, BreastClass::IV];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Allowed inner-tissue percentages `(min, max)` in the order
    /// adipose, transitional, fibro-glandular.
    pub fn ranges(self) -> [(f64, f64); 3] {
        match self {
            BreastClass::I => [(65.0, 90.0), (5.0, 15.0), (5.0, 20.0)],
            BreastClass::II => [(50.0, 70.0), (10.0, 20.0), (20.0, 30.0)],
            BreastClass::III => [(40.0, 55.0), (15.0, 20.0), (30.0, 40.0)],
            BreastClass::IV => [(10.0, 40.0), (20.0, 25.0), (40.0, 65.0)],
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            BreastClass::I => "mostly adipose",
            BreastClass::II => "scattered fibroglandular",
            BreastClass::III => "dense",
            BreastClass::IV => "very dense",
        }
    }

    /// Whether `percentages` (adipose, transitional, fibro) fit the class ranges.
    pub fn admits(self, percentages: [f64; 3]) -> bool {
        self.ranges()
            .iter()
            .zip(percentages.iter())
            .all(|(&(lo, hi), &p)| p >= lo && p <= hi)
    }
}

impl fmt::Display for BreastClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BreastClass::I => "I",
            BreastClass::II => "II",
            BreastClass::III => "III",
            BreastClass::IV => "IV",
        };
        f.write_str(s)
    }
}

impl FromStr for BreastClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(BreastClass::I),
            "II" | "2" => Ok(BreastClass::II),
            "III" | "3" => Ok(BreastClass::III),
            "IV" | "4" => Ok(BreastClass::IV),
            other => Err(Error::invalid(format!(
                "unknown breast class `{other}` (expected I, II, III or IV)"
            ))),
        }
    }
}

/// Generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    /// Exponent of the isotropic power-law spectrum of the tissue field.
    pub spectral_exponent: f64,
    /// Standard deviation (pixels) of the inner-tissue blur; 0 disables it.
    pub smoothing_std: f64,
    /// Per-pixel jitter std as a fraction of the tissue base value.
    pub jitter: f64,
    /// Target percentages are kept this many points inside the class ranges.
    pub percentage_margin: f64,
    /// Regeneration attempts when segmentation is rejected.
    pub max_retries: usize,
    pub tissues: TissueDielectricStats,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            spectral_exponent: 3.0,
            smoothing_std: 0.75,
            jitter: 0.10,
            percentage_margin: 2.0,
            max_retries: 10,
            tissues: TissueDielectricStats::default(),
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.spectral_exponent.is_finite() && self.spectral_exponent >= 0.0) {
            return Err(Error::invalid("phantom spectral_exponent must be >= 0"));
        }
        if !(self.smoothing_std.is_finite() && self.smoothing_std >= 0.0) {
            return Err(Error::invalid("phantom smoothing_std must be >= 0"));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::invalid("phantom jitter must be >= 0"));
        }
        if !(0.0..=5.0).contains(&self.percentage_margin) {
            return Err(Error::invalid("phantom percentage_margin must lie in [0, 5]"));
        }
        if self.max_retries == 0 {
            return Err(Error::invalid("phantom max_retries must be positive"));
        }
        self.tissues.validate()
    }
}

/// A generated or imported phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub labels: TissueLabelMap,
    pub dielectrics: DielectricMap,
    /// `None` for imported phantoms.
    pub geometry: Option<BreastGeometry>,
    pub class_id: Option<BreastClass>,
    pub seed: Option<u64>,
}

impl Phantom {
    pub fn grid(&self) -> Grid {
        self.dielectrics.grid
    }

    /// Achieved inner-tissue percentages (adipose, transitional, fibro).
    pub fn tissue_percentages(&self) -> [f64; 3] {
        self.labels.inner_percentages()
    }

    /// Background-only phantom.
    pub fn background(grid: Grid, bg: &BackgroundMedium) -> Self {
        Phantom {
            labels: TissueLabelMap::empty(grid),
            dielectrics: DielectricMap::uniform(grid, bg),
            geometry: None,
            class_id: None,
            seed: None,
        }
    }
}

/// Full generator for one phantom. Pure function of `(class, configs, seed)`.
pub fn generate_phantom(
    class: BreastClass,
    grid: &Grid,
    bg: &BackgroundMedium,
    config: &PhantomConfig,
    seed: u64,
) -> Result<Phantom> {
    config.validate()?;
    grid.validate()?;
    let mut last_err = None;
    for attempt in 0..config.max_retries {
        let mut rng: Rng = rng::stream(seed, &[rng::tag::PHANTOM, attempt as u64]);
        match generate_once(class, grid, bg, config, &mut rng) {
            Ok((labels, dielectrics, geometry)) => {
                return Ok(Phantom {
                    labels,
                    dielectrics,
                    geometry: Some(geometry),
                    class_id: Some(class),
                    seed: Some(seed),
                })
            }
            Err(e @ Error::Generation { stage: "segment", .. }) => {
                log::debug!("phantom seed {seed} attempt {attempt}: {e}");
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Generation {
        stage: "generate",
        message: format!(
            "segmentation rejected {} times; last: {}",
            config.max_retries,
            last_err.map(|e| e.to_string()).unwrap_or_default()
        ),
    })
}

fn generate_once(
    class: BreastClass,
    grid: &Grid,
    bg: &BackgroundMedium,
    config: &PhantomConfig,
    rng: &mut Rng,
) -> Result<(TissueLabelMap, DielectricMap, BreastGeometry)> {
    let geometry = sample_geometry(rng);
    let field = multifractal_field(grid, config.spectral_exponent, rng)?;
    let labels = segment_tissues(&field, &geometry, grid, class, config.percentage_margin, rng)?;
    let raw = assign_dielectrics(&labels, &config.tissues, bg, config.jitter, rng)?;
    let smooth = smooth_correlate(&raw, &labels, config.smoothing_std);
    Ok((labels, smooth, geometry))
}
