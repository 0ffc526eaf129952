use ndarray::Array2;
use std::path::{Path, PathBuf};

use super::segment::TissueLabelMap;
use super::{Phantom, Tissue};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::medium::{BackgroundMedium, DielectricMap};
use crate::raster::{self, DType};

/// Permittivity cut points for imported rasters: below the first is adipose,
/// below the second transitional, otherwise fibro-glandular.
pub const IMPORT_THRESHOLDS: (f64, f64) = (12.0, 30.0);

/// Derive tissue labels from dielectric rasters.
///
/// Cells equal to the background are label 0. Breast cells 4-adjacent to the
/// background (or on the domain edge) are skin; the rest is classified by
/// [`IMPORT_THRESHOLDS`].
pub fn labels_from_dielectrics(map: &DielectricMap, bg: &BackgroundMedium) -> TissueLabelMap {
    let n = map.grid.n;
    let support = ndarray::Zip::from(&map.eps_r)
        .and(&map.sigma)
        .map_collect(|&e, &s| !(e == bg.eps_r && s == bg.sigma));
    let mut labels = Array2::<u8>::zeros((n, n));
    for r in 0..n {
        for c in 0..n {
            if !support[[r, c]] {
                continue;
            }
            let edge = r == 0 || c == 0 || r + 1 == n || c + 1 == n;
            let touches = edge
                || !support[[r - 1, c]]
                || !support[[r + 1, c]]
                || !support[[r, c - 1]]
                || !support[[r, c + 1]];
            let e = map.eps_r[[r, c]];
            let t = if touches {
                Tissue::Skin
            } else if e < IMPORT_THRESHOLDS.0 {
                Tissue::Adipose
            } else if e < IMPORT_THRESHOLDS.1 {
                Tissue::Transitional
            } else {
                Tissue::Fibroglandular
            };
            labels[[r, c]] = t.code();
        }
    }
    TissueLabelMap {
        grid: map.grid,
        labels,
    }
}

/// Load an externally produced phantom from two `MWTR` rasters.
pub fn import_external_phantom(
    eps_path: &Path,
    sigma_path: &Path,
    grid: &Grid,
    bg: &BackgroundMedium,
) -> Result<Phantom> {
    let eps_r = raster::read(eps_path)?;
    let sigma = raster::read(sigma_path)?;
    for (path, a) in [(eps_path, &eps_r), (sigma_path, &sigma)] {
        if a.dim() != grid.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?} (grid)", grid.shape()),
                found: format!("{:?} in {}", a.dim(), path.display()),
            });
        }
    }
    let dielectrics = DielectricMap::new(*grid, eps_r, sigma)?;
    let labels = labels_from_dielectrics(&dielectrics, bg);
    Ok(Phantom {
        labels,
        dielectrics,
        geometry: None,
        class_id: None,
        seed: None,
    })
}

/// Write `eps.mwtr`, `sigma.mwtr` (f64) and `labels.mwtr` (f32) into `dir`.
pub fn export_phantom(phantom: &Phantom, dir: &Path) -> Result<[PathBuf; 3]> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = [dir.join("eps.mwtr"), dir.join("sigma.mwtr"), dir.join("labels.mwtr")];
    raster::write(&paths[0], &phantom.dielectrics.eps_r, DType::F64)?;
    raster::write(&paths[1], &phantom.dielectrics.sigma, DType::F64)?;
    raster::write(&paths[2], &phantom.labels.labels.mapv(f64::from), DType::F32)?;
    Ok(paths)
}
