//! 8-bit grayscale PGM previews with an explicit color scale.

use anyhow::{bail, Context, Result};
use ndarray::Array2;
use std::path::{Path, PathBuf};

/// Linear gray scale: `min` maps to 0 and `max` to 255.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
}

impl Scale {
    /// Data range of `a`; a constant raster gets a unit-wide range.
    pub fn of(a: &Array2<f64>) -> Self {
        let min = a.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max > min {
            Scale { min, max }
        } else {
            Scale { min, max: min + 1.0 }
        }
    }

    fn level(&self, v: f64) -> u8 {
        let t = ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0);
        (t * 255.0).round() as u8
    }
}

/// Encode as binary PGM (P5). Non-finite pixels are rejected.
pub fn pgm_bytes(a: &Array2<f64>, scale: Scale) -> Result<Vec<u8>> {
    if !(scale.min.is_finite() && scale.max.is_finite() && scale.max > scale.min) {
        bail!("invalid color scale ({}, {})", scale.min, scale.max);
    }
    if let Some(((r, c), v)) = a.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(mwtomo::Error::Corrupt {
            location: "raster".into(),
            message: format!("non-finite pixel {v} at row {r}, column {c}"),
        }
        .into());
    }
    let (rows, cols) = a.dim();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(a.iter().map(|&v| scale.level(v)));
    Ok(out)
}

/// Write `<stem>.pgm` and `<stem>.scale.txt`; returns both paths.
pub fn write_preview(dir: &Path, stem: &str, a: &Array2<f64>, scale: Option<Scale>) -> Result<[PathBuf; 2]> {
    let scale = scale.unwrap_or_else(|| Scale::of(a));
    let bytes = pgm_bytes(a, scale).with_context(|| format!("rendering {stem}"))?;
    let img = dir.join(format!("{stem}.pgm"));
    let side = dir.join(format!("{stem}.scale.txt"));
    std::fs::write(&img, bytes).with_context(|| format!("writing {}", img.display()))?;
    std::fs::write(&side, format!("min = {:e}\nmax = {:e}\n", scale.min, scale.max))
        .with_context(|| format!("writing {}", side.display()))?;
    Ok([img, side])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_raster_is_uniform() {
        let a = Array2::from_elem((3, 4), 7.0);
        let b = pgm_bytes(&a, Scale::of(&a)).unwrap();
        let header = b"P5\n4 3\n255\n".len();
        assert!(b[header..].iter().all(|&p| p == 0));
    }

    #[test]
    fn shared_scale_gives_same_levels() {
        let s = Scale { min: 1.0, max: 60.0 };
        let a = Array2::from_shape_vec((1, 2), vec![30.0, 1.0]).unwrap();
        let b = Array2::from_shape_vec((1, 3), vec![5.0, 30.0, 60.0]).unwrap();
        let pa = pgm_bytes(&a, s).unwrap();
        let pb = pgm_bytes(&b, s).unwrap();
        assert_eq!(pa[pa.len() - 2], pb[pb.len() - 2]);
        assert_eq!(pb[pb.len() - 1], 255);
        assert_eq!(pa[pa.len() - 1], 0);
    }

    #[test]
    fn nan_pixel_named() {
        let mut a = Array2::zeros((2, 2));
        a[[1, 0]] = f64::NAN;
        let e = pgm_bytes(&a, Scale { min: 0.0, max: 1.0 }).unwrap_err().to_string();
        assert!(e.contains("row 1, column 0"), "{e}");
    }
}
