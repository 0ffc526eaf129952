use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng as _;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::Grid;
use crate::rng::Rng;

/// Signed FFT frequency (cycles per sample) of bin `i` on `n` points.
fn fftfreq(i: usize, n: usize) -> f64 {
    let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
    k / n as f64
}

/// Spectral-synthesis random field with power spectrum `|k|^-exponent`.
///
/// Each nonzero frequency gets amplitude `|k|^(-exponent/2)` and a uniform
/// random phase; the real part of the inverse transform is normalised to
/// zero mean and unit variance.
pub fn multifractal_field(grid: &Grid, exponent: f64, rng: &mut Rng) -> Result<Array2<f64>> {
    grid.validate()?;
    if !(exponent.is_finite() && exponent >= 0.0) {
        return Err(Error::invalid(format!("spectral exponent must be >= 0, got {exponent}")));
    }
    let n = grid.n;
    let fft = Fft2::new(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..n {
        let fy = fftfreq(r, n);
        for c in 0..n {
            let fx = fftfreq(c, n);
            let phase = rng.random_range(0.0..2.0 * PI);
            let k = fx.hypot(fy);
            if k > 0.0 {
                buf[r * n + c] = Complex64::from_polar(k.powf(-0.5 * exponent), phase);
            }
        }
    }
    fft.inverse(&mut buf);
    let mut field = Array2::from_shape_fn((n, n), |(r, c)| buf[r * n + c].re);
    let mean = field.mean().unwrap_or(0.0);
    field.mapv_inplace(|v| v - mean);
    let var = field.iter().map(|v| v * v).sum::<f64>() / field.len() as f64;
    if !(var > 0.0) {
        return Err(Error::Numerical("random field has zero variance".into()));
    }
    let inv_std = var.sqrt().recip();
    field.mapv_inplace(|v| v * inv_std);
    Ok(field)
}
