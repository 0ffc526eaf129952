use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::smatrix::ScatteringMatrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Add circular complex white Gaussian noise at `snr_db`, measured over the
/// whole matrix: per-entry noise variance is the mean signal power times
/// `10^(-snr_db / 10)`. `f64::INFINITY` returns the input unchanged.
pub fn add_awgn(s: &ScatteringMatrix, snr_db: f64, rng: &mut Rng) -> Result<ScatteringMatrix> {
    if snr_db == f64::INFINITY {
        return Ok(s.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!("SNR must be finite or +inf, got {snr_db}")));
    }
    if !s.is_finite() {
        return Err(Error::invalid("scattering matrix has non-finite entries"));
    }
    let power = s.mean_power();
    if power == 0.0 {
        return Err(Error::invalid("cannot set a finite SNR on a zero-signal matrix"));
    }
    let std = (0.5 * power * 10f64.powf(-snr_db / 10.0)).sqrt();
    let mut out = s.clone();
    for z in out.values.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z += Complex64::new(re, im) * std;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::Array2;

    fn matrix() -> ScatteringMatrix {
        ScatteringMatrix {
            values: Array2::from_shape_fn((30, 30), |(i, j)| Complex64::from_polar(1.0 + (i + j) as f64 * 0.01, i as f64)),
            frequency: 1e9,
            fingerprint: [0; 32],
        }
    }

    #[test]
    fn infinite_snr_is_identity() {
        let s = matrix();
        assert_eq!(add_awgn(&s, f64::INFINITY, &mut rng::stream(0, &[])).unwrap(), s);
    }

    #[test]
    fn zero_signal_rejected() {
        let mut s = matrix();
        s.values.fill(Complex64::new(0.0, 0.0));
        assert!(add_awgn(&s, 30.0, &mut rng::stream(0, &[])).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let s = matrix();
        let a = add_awgn(&s, 10.0, &mut rng::stream(4, &[])).unwrap();
        let b = add_awgn(&s, 10.0, &mut rng::stream(4, &[])).unwrap();
        assert_eq!(a, b);
    }
}
