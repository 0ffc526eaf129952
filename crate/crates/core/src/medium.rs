//! Dielectric descriptions of the background and of the imaged object.
//!
//! Time convention is `exp(+j omega t)`: passive media carry a negative
//! imaginary permittivity and outgoing waves use Hankel functions of the
//! second kind.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability (H/m).
pub const MU0: f64 = 4.0 * PI * 1e-7;

/// Relative complex permittivity `eps_r - j sigma / (omega eps0)`.
pub fn complex_permittivity(eps_r: f64, sigma: f64, frequency: f64) -> Result<Complex64> {
    check_frequency(frequency)?;
    if !eps_r.is_finite() || eps_r < 1.0 {
        return Err(Error::invalid(format!(
            "relative permittivity must be >= 1, got {eps_r}"
        )));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::invalid(format!(
            "conductivity must be >= 0, got {sigma}"
        )));
    }
    Ok(complex_permittivity_unchecked(eps_r, sigma, frequency))
}

#[inline]
pub(crate) fn complex_permittivity_unchecked(eps_r: f64, sigma: f64, frequency: f64) -> Complex64 {
    Complex64::new(eps_r, -sigma / (2.0 * PI * frequency * EPS0))
}

/// Inverse of [`complex_permittivity`]: `(eps_r, sigma)` of a complex value.
#[inline]
pub fn split_permittivity(eps: Complex64, frequency: f64) -> (f64, f64) {
    (eps.re, -eps.im * 2.0 * PI * frequency * EPS0)
}

pub(crate) fn check_frequency(frequency: f64) -> Result<()> {
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(Error::invalid(format!(
            "frequency must be positive, got {frequency}"
        )));
    }
    Ok(())
}

/// Homogeneous medium hosting the antennas and the object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundMedium {
    pub eps_r: f64,
    /// Conductivity (S/m).
    pub sigma: f64,
}

impl Default for BackgroundMedium {
    fn default() -> Self {
        BackgroundMedium {
            eps_r: 23.0,
            sigma: 0.0,
        }
    }
}

impl BackgroundMedium {
    pub fn new(eps_r: f64, sigma: f64) -> Result<Self> {
        let bg = BackgroundMedium { eps_r, sigma };
        bg.validate()?;
        Ok(bg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_r.is_finite() && self.eps_r >= 1.0) {
            return Err(Error::invalid(format!(
                "background permittivity must be >= 1, got {}",
                self.eps_r
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "background conductivity must be >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn permittivity(&self, frequency: f64) -> Result<Complex64> {
        complex_permittivity(self.eps_r, self.sigma, frequency)
    }

    /// Background wavenumber `omega sqrt(mu0 eps0 eps_b)` with `Re >= 0`, `Im <= 0`.
    pub fn wavenumber(&self, frequency: f64) -> Result<Complex64> {
        let eps = self.permittivity(frequency)?;
        let k0 = 2.0 * PI * frequency / C0;
        let mut k = eps.sqrt() * k0;
        // principal sqrt of a lower-half-plane value already lands in the
        // fourth quadrant; normalise the lossless edge case
        if k.re < 0.0 {
            k = -k;
        }
        Ok(k)
    }

    /// Intrinsic impedance `sqrt(mu0 / (eps0 eps_b))`.
    pub fn impedance(&self, frequency: f64) -> Result<Complex64> {
        let eps = self.permittivity(frequency)?;
        Ok((Complex64::from(MU0) / (eps * EPS0)).sqrt())
    }
}

/// Free-function form of [`BackgroundMedium::wavenumber`].
pub fn wavenumber(bg: &BackgroundMedium, frequency: f64) -> Result<Complex64> {
    bg.validate()?;
    bg.wavenumber(frequency)
}

/// Paired relative-permittivity and conductivity rasters.
#[derive(Debug, Clone, PartialEq)]
pub struct DielectricMap {
    pub grid: Grid,
    pub eps_r: Array2<f64>,
    pub sigma: Array2<f64>,
}

impl DielectricMap {
    pub fn new(grid: Grid, eps_r: Array2<f64>, sigma: Array2<f64>) -> Result<Self> {
        let map = DielectricMap { grid, eps_r, sigma };
        map.validate()?;
        Ok(map)
    }

    /// Map filled with the background values.
    pub fn uniform(grid: Grid, bg: &BackgroundMedium) -> Self {
        DielectricMap {
            grid,
            eps_r: Array2::from_elem(grid.shape(), bg.eps_r),
            sigma: Array2::from_elem(grid.shape(), bg.sigma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("eps_r", &self.eps_r), ("sigma", &self.sigma)] {
            if a.dim() != self.grid.shape() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{:?}", self.grid.shape()),
                    found: format!("{name} {:?}", a.dim()),
                });
            }
        }
        if let Some(((r, c), v)) = self
            .eps_r
            .indexed_iter()
            .find(|(_, &v)| !(v.is_finite() && v >= 1.0))
        {
            return Err(Error::invalid(format!(
                "eps_r = {v} at (row {r}, col {c}) violates eps_r >= 1"
            )));
        }
        if let Some(((r, c), v)) = self
            .sigma
            .indexed_iter()
            .find(|(_, &v)| !(v.is_finite() && v >= 0.0))
        {
            return Err(Error::invalid(format!(
                "sigma = {v} at (row {r}, col {c}) violates sigma >= 0"
            )));
        }
        Ok(())
    }

    pub fn complex_permittivity(&self, frequency: f64) -> Array2<Complex64> {
        ndarray::Zip::from(&self.eps_r)
            .and(&self.sigma)
            .map_collect(|&e, &s| complex_permittivity_unchecked(e, s, frequency))
    }

    /// Rebuild from complex permittivity, projecting onto `eps_r >= 1`, `sigma >= 0`.
    pub fn from_complex_projected(grid: Grid, eps: &Array2<Complex64>, frequency: f64) -> Self {
        let mut eps_r = Array2::zeros(grid.shape());
        let mut sigma = Array2::zeros(grid.shape());
        ndarray::Zip::from(&mut eps_r)
            .and(&mut sigma)
            .and(eps)
            .for_each(|e, s, &z| {
                let (er, sg) = split_permittivity(z, frequency);
                *e = if er.is_finite() { er.max(1.0) } else { 1.0 };
                *s = if sg.is_finite() { sg.max(0.0) } else { 0.0 };
            });
        DielectricMap { grid, eps_r, sigma }
    }
}

/// Normalized contrast `eps / eps_b - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMap {
    pub grid: Grid,
    pub chi: Array2<Complex64>,
}

impl ContrastMap {
    pub fn zeros(grid: Grid) -> Self {
        ContrastMap {
            grid,
            chi: Array2::zeros(grid.shape()),
        }
    }

    pub fn new(grid: Grid, chi: Array2<Complex64>) -> Result<Self> {
        if chi.dim() != grid.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", grid.shape()),
                found: format!("{:?}", chi.dim()),
            });
        }
        if chi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("contrast must be finite"));
        }
        Ok(ContrastMap { grid, chi })
    }

    pub fn is_zero(&self) -> bool {
        self.chi.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.chi.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Complex permittivity `(chi + 1) eps_b`.
    pub fn permittivity(&self, bg: &BackgroundMedium, frequency: f64) -> Result<Array2<Complex64>> {
        let eps_b = bg.permittivity(frequency)?;
        Ok(self.chi.mapv(|c| (c + 1.0) * eps_b))
    }

    /// Dielectric map after projecting onto physical bounds.
    pub fn to_dielectric(&self, bg: &BackgroundMedium, frequency: f64) -> Result<DielectricMap> {
        let eps = self.permittivity(bg, frequency)?;
        Ok(DielectricMap::from_complex_projected(self.grid, &eps, frequency))
    }
}

/// Contrast of `map` against `bg`; exactly zero wherever the map equals the background.
pub fn contrast_of(map: &DielectricMap, bg: &BackgroundMedium, frequency: f64) -> Result<ContrastMap> {
    check_frequency(frequency)?;
    bg.validate()?;
    map.validate()?;
    let eps_b = bg.permittivity(frequency)?;
    if eps_b.norm() == 0.0 {
        return Err(Error::invalid("background permittivity is zero"));
    }
    let chi = ndarray::Zip::from(&map.eps_r)
        .and(&map.sigma)
        .map_collect(|&e, &s| {
            if e == bg.eps_r && s == bg.sigma {
                Complex64::new(0.0, 0.0)
            } else {
                complex_permittivity_unchecked(e, s, frequency) / eps_b - 1.0
            }
        });
    Ok(ContrastMap {
        grid: map.grid,
        chi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lossless_vacuum_is_unity() {
        let e = complex_permittivity(1.0, 0.0, 1e9).unwrap();
        assert_eq!(e, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn lossy_permittivity_matches_formula() {
        // 1 / (2 pi 1e9 eps0)
        let scale = 1.0 / (2.0 * PI * 1e9 * 8.8541878128e-12);
        let e = complex_permittivity(40.0, 1.0, 1e9).unwrap();
        assert_eq!(e.re, 40.0);
        assert_relative_eq!(e.im, -scale, max_relative = 1e-14);
        assert_relative_eq!(e.im, -17.975, epsilon = 1e-3);
        let e = complex_permittivity(5.0, 0.1, 1e9).unwrap();
        assert_relative_eq!(e.im, -1.7975, epsilon = 1e-4);
    }

    #[test]
    fn permittivity_is_linear_in_sigma() {
        let a = complex_permittivity(10.0, 0.3, 2e9).unwrap();
        let b = complex_permittivity(10.0, 0.6, 2e9).unwrap();
        let z = complex_permittivity(10.0, 0.0, 2e9).unwrap();
        assert_relative_eq!((b - z).im, 2.0 * (a - z).im, max_relative = 1e-14);
    }

    #[test]
    fn rejects_unphysical_inputs() {
        assert!(complex_permittivity(0.5, 0.0, 1e9).is_err());
        assert!(complex_permittivity(2.0, -0.1, 1e9).is_err());
        assert!(complex_permittivity(2.0, 0.1, 0.0).is_err());
        assert!(complex_permittivity(f64::NAN, 0.1, 1e9).is_err());
    }

    #[test]
    fn vacuum_wavenumber() {
        let k = wavenumber(&BackgroundMedium::new(1.0, 0.0).unwrap(), 1e9).unwrap();
        assert_relative_eq!(k.re, 2.0 * PI * 1e9 / C0, max_relative = 1e-14);
        assert_relative_eq!(k.re, 20.958, epsilon = 1e-3);
        assert_eq!(k.im, 0.0);
        let k4 = wavenumber(&BackgroundMedium::new(4.0, 0.0).unwrap(), 1e9).unwrap();
        assert_eq!(k4.re, 2.0 * k.re);
    }

    #[test]
    fn lossy_wavenumber_decays() {
        let k = wavenumber(&BackgroundMedium::new(10.0, 0.5).unwrap(), 1e9).unwrap();
        assert!(k.re > 0.0 && k.im < 0.0);
    }

    #[test]
    fn background_map_has_zero_contrast() {
        let g = Grid::new(0.1, 8).unwrap();
        let bg = BackgroundMedium::new(23.0, 0.2).unwrap();
        let c = contrast_of(&DielectricMap::uniform(g, &bg), &bg, 1e9).unwrap();
        assert!(c.is_zero());
    }

    #[test]
    fn doubled_lossless_pixel_has_unit_contrast() {
        let g = Grid::new(0.1, 8).unwrap();
        let bg = BackgroundMedium::new(20.0, 0.0).unwrap();
        let mut m = DielectricMap::uniform(g, &bg);
        m.eps_r[[3, 4]] = 40.0;
        let c = contrast_of(&m, &bg, 1e9).unwrap();
        assert_eq!(c.chi[[3, 4]], Complex64::new(1.0, 0.0));
        assert_eq!(c.chi[[0, 0]], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn contrast_round_trip() {
        let g = Grid::new(0.1, 8).unwrap();
        let bg = BackgroundMedium::new(23.0, 0.1).unwrap();
        let mut m = DielectricMap::uniform(g, &bg);
        for ((r, c), v) in m.eps_r.indexed_iter_mut() {
            *v = 1.0 + ((r * 7 + c * 3) % 11) as f64 * 4.3;
        }
        for ((r, c), v) in m.sigma.indexed_iter_mut() {
            *v = ((r * 5 + c) % 9) as f64 * 0.17;
        }
        let chi = contrast_of(&m, &bg, 1e9).unwrap();
        let eps = chi.permittivity(&bg, 1e9).unwrap();
        let direct = m.complex_permittivity(1e9);
        for (a, b) in eps.iter().zip(direct.iter()) {
            assert!((a - b).norm() <= 1e-12 * b.norm());
        }
        let back = chi.to_dielectric(&bg, 1e9).unwrap();
        for (a, b) in back.eps_r.iter().zip(m.eps_r.iter()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = Grid::new(0.1, 8).unwrap();
        let r = DielectricMap::new(g, Array2::from_elem((8, 9), 2.0), Array2::zeros((8, 8)));
        assert!(matches!(r, Err(Error::ShapeMismatch { .. })));
    }
}
