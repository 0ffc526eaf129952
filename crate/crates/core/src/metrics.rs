//! Spectral and pixel-domain quality metrics.
//!
//! Spatial frequencies are in cycles per pixel of the raster, so the axis
//! Nyquist frequency is 0.5. The 2D spectrum of an `n x n` image is
//! `|DFT(x - mean(x))|^2 / n^4`, which makes the sum over all frequencies equal
//! to the mean squared deviation per pixel (Parseval with scale `1 / n^2`).

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::medium::DielectricMap;

/// Centered mean power spectrum of a set of equally sized square images.
///
/// Index `(n/2, n/2)` holds the zero frequency.
pub fn mean_squared_spectrum(images: &[Array2<f64>]) -> Result<Array2<f64>> {
    let first = images.first().ok_or_else(|| Error::invalid("empty image set"))?;
    let (rows, cols) = first.dim();
    if rows != cols || rows == 0 {
        return Err(Error::invalid(format!("images must be square, got {rows}x{cols}")));
    }
    if let Some(i) = images.iter().position(|im| im.dim() != (rows, cols)) {
        return Err(Error::ShapeMismatch {
            expected: format!("{rows}x{cols}"),
            found: format!("image {i} is {:?}", images[i].dim()),
        });
    }
    let n = rows;
    let fft = Fft2::new(n);
    let scale = 1.0 / ((n * n) as f64).powi(2);
    let per_image: Vec<Vec<f64>> = images
        .par_iter()
        .map(|im| {
            let mean = im.mean().unwrap_or(0.0);
            let mut buf: Vec<Complex64> = im.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
            fft.forward(&mut buf);
            buf.iter().map(|z| z.norm_sqr() * scale).collect()
        })
        .collect();
    let mut acc = vec![0.0; n * n];
    for p in &per_image {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let inv = 1.0 / images.len() as f64;
    let half = n / 2;
    let mut out = Array2::zeros((n, n));
    for r in 0..n {
        for c in 0..n {
            out[[(r + half) % n, (c + half) % n]] = acc[r * n + c] * inv;
        }
    }
    Ok(out)
}

/// Angular average of a centered 2D spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSpectrum {
    /// Bin centres, `0, d, 2d, .., 0.5` cycles per pixel.
    pub nu: Vec<f64>,
    /// Mean power in each annulus (0 for an empty annulus).
    pub s: Vec<f64>,
    pub population: Vec<usize>,
    /// Number of images behind the spectrum.
    pub n_images: usize,
    /// Summed power of the corner frequencies beyond the last annulus.
    pub corner_power: f64,
    pub corner_population: usize,
}

impl RadialSpectrum {
    /// `sum_i s_i population_i + corner_power`, the total 2D power.
    pub fn total_power(&self) -> f64 {
        self.s.iter().zip(&self.population).map(|(s, &p)| s * p as f64).sum::<f64>() + self.corner_power
    }

    /// Values in dB relative to the largest bin.
    pub fn normalized_db(&self) -> Vec<f64> {
        let max = self.s.iter().cloned().fold(0.0, f64::max);
        self.s.iter().map(|&s| 10.0 * (s / max).log10()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("nu,s,bin_population\n");
        for ((nu, s), p) in self.nu.iter().zip(&self.s).zip(&self.population) {
            let _ = writeln!(out, "{nu:.6},{s:.12e},{p}");
        }
        out
    }
}

/// Average `spectrum` over annuli of width `0.5 / (n_bins - 1)` centred on
/// `nu_i = i * 0.5 / (n_bins - 1)`.
pub fn radial_average(spectrum: &Array2<f64>, n_bins: usize, n_images: usize) -> Result<RadialSpectrum> {
    if n_bins < 2 {
        return Err(Error::invalid(format!("need at least 2 radial bins, got {n_bins}")));
    }
    if n_images == 0 {
        return Err(Error::invalid("a spectrum needs at least one image"));
    }
    let (n, m) = spectrum.dim();
    if n != m || n == 0 {
        return Err(Error::invalid(format!("spectrum must be square, got {n}x{m}")));
    }
    let step = 0.5 / (n_bins - 1) as f64;
    let half = (n / 2) as f64;
    let mut sum = vec![0.0; n_bins];
    let mut population = vec![0usize; n_bins];
    let mut corner_power = 0.0;
    let mut corner_population = 0;
    for ((r, c), &v) in spectrum.indexed_iter() {
        let fy = (r as f64 - half) / n as f64;
        let fx = (c as f64 - half) / n as f64;
        let bin = (fx.hypot(fy) / step).round() as usize;
        if bin < n_bins {
            sum[bin] += v;
            population[bin] += 1;
        } else {
            corner_power += v;
            corner_population += 1;
        }
    }
    let s = sum
        .iter()
        .zip(&population)
        .map(|(&t, &p)| if p > 0 { t / p as f64 } else { 0.0 })
        .collect();
    Ok(RadialSpectrum {
        nu: (0..n_bins).map(|i| i as f64 * step).collect(),
        s,
        population,
        n_images,
        corner_power,
        corner_population,
    })
}

/// Mean-squared radial spectrum of an image set with one bin per frequency step.
pub fn image_set_spectrum(images: &[Array2<f64>]) -> Result<RadialSpectrum> {
    let power = mean_squared_spectrum(images)?;
    let n = power.nrows();
    radial_average(&power, n / 2 + 1, images.len())
}

/// Largest frequency up to which `a` stays within 3 dB of `b`.
///
/// The zero-frequency bin is skipped (means are removed). The crossing is
/// linearly interpolated between the last compliant bin and the first
/// violating one; a violation in the first non-zero bin gives 0 and no
/// violation gives the last bin centre (Nyquist).
pub fn minus3db_crossover(a: &RadialSpectrum, b: &RadialSpectrum) -> Result<f64> {
    if a.nu != b.nu {
        return Err(Error::invalid("spectra use different frequency bins"));
    }
    let threshold = 3.0;
    let mut prev: Option<(f64, f64)> = None;
    for i in 1..a.nu.len() {
        if b.s[i] <= 0.0 {
            return Err(Error::Numerical(format!(
                "reference spectrum is zero at nu = {:.4} below the crossover",
                b.nu[i]
            )));
        }
        let dev = (10.0 * (a.s[i] / b.s[i]).log10()).abs();
        if dev > threshold {
            return Ok(match prev {
                None => 0.0,
                Some((nu0, d0)) if dev.is_finite() => nu0 + (threshold - d0) / (dev - d0) * (a.nu[i] - nu0),
                Some((nu0, _)) => nu0,
            });
        }
        prev = Some((a.nu[i], dev));
    }
    Ok(*a.nu.last().expect("at least two bins"))
}

fn check_same_grid(estimate: &DielectricMap, reference: &DielectricMap) -> Result<()> {
    if estimate.grid != reference.grid || estimate.eps_r.dim() != reference.eps_r.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", reference.eps_r.dim()),
            found: format!("{:?}", estimate.eps_r.dim()),
        });
    }
    Ok(())
}

fn channel_nmse(e: &Array2<f64>, r: &Array2<f64>, what: &str) -> Result<f64> {
    let den: f64 = r.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::invalid(format!("reference {what} map is identically zero")));
    }
    Ok(e.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / den)
}

/// `||est - ref||^2 / ||ref||^2` for permittivity and conductivity.
pub fn nmse(estimate: &DielectricMap, reference: &DielectricMap) -> Result<(f64, f64)> {
    check_same_grid(estimate, reference)?;
    Ok((
        channel_nmse(&estimate.eps_r, &reference.eps_r, "permittivity")?,
        channel_nmse(&estimate.sigma, &reference.sigma, "conductivity")?,
    ))
}

/// Relative RMS error `||est - ref|| / ||ref||` of the permittivity.
pub fn relative_rms(estimate: &DielectricMap, reference: &DielectricMap) -> Result<f64> {
    check_same_grid(estimate, reference)?;
    Ok(channel_nmse(&estimate.eps_r, &reference.eps_r, "permittivity")?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(n: usize, k: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |(_, c)| (2.0 * PI * (k * c) as f64 / n as f64).cos())
    }

    #[test]
    fn constant_image_has_no_power() {
        let s = mean_squared_spectrum(&[Array2::from_elem((8, 8), 3.0)]).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tone_gives_symmetric_peaks() {
        let n = 16;
        let s = mean_squared_spectrum(&[tone(n, 3)]).unwrap();
        let peak = s[[8, 8 + 3]];
        assert!((peak - 0.25).abs() < 1e-12);
        assert!((s[[8, 8 - 3]] - peak).abs() < 1e-12);
        for ((r, c), &v) in s.indexed_iter() {
            if !(r == 8 && (c == 11 || c == 5)) {
                assert!(v <= 1e-10 * peak);
            }
        }
        let radial = radial_average(&s, 9, 1).unwrap();
        let best = (0..9).max_by(|&i, &j| radial.s[i].total_cmp(&radial.s[j])).unwrap();
        assert_eq!(best, 3);
    }

    #[test]
    fn crossover_edge_cases() {
        let s = radial_average(&mean_squared_spectrum(&[tone(16, 2), tone(16, 5)]).unwrap(), 9, 2).unwrap();
        let mut flat = s.clone();
        flat.s = vec![1.0; 9];
        assert_eq!(minus3db_crossover(&flat, &flat).unwrap(), 0.5);
        let mut quarter = flat.clone();
        quarter.s = vec![0.25; 9];
        assert_eq!(minus3db_crossover(&quarter, &flat).unwrap(), 0.0);
        let mut zero_ref = flat.clone();
        zero_ref.s[4] = 0.0;
        assert!(minus3db_crossover(&flat, &zero_ref).is_err());
    }

    #[test]
    fn crossover_interpolates() {
        let nu: Vec<f64> = (0..5).map(|i| i as f64 * 0.125).collect();
        let b = RadialSpectrum {
            nu: nu.clone(),
            s: vec![1.0; 5],
            population: vec![1; 5],
            n_images: 1,
            corner_power: 0.0,
            corner_population: 0,
        };
        let mut a = b.clone();
        // 0 dB, 0 dB, then 2 dB and 4 dB deviations
        a.s = vec![1.0, 1.0, 10f64.powf(0.2), 10f64.powf(0.4), 1.0];
        let x = minus3db_crossover(&a, &b).unwrap();
        assert!((x - (0.25 + 0.5 * 0.125)).abs() < 1e-12);
    }

    #[test]
    fn bins_need_two() {
        assert!(radial_average(&Array2::zeros((4, 4)), 1, 1).is_err());
        assert!(mean_squared_spectrum(&[]).is_err());
    }
}
