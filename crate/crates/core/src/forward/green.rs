use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::special::{bessel_j1, hankel2_0, hankel2_01};

/// Discretised interaction coefficients on the equal-area disc cells.
///
/// Both kernels already carry the `k_b^2` factor of the domain equation, so
/// `E_t = E_i + internal * (chi E_t)` and `E_s[r] = sum_c external[r, c] chi_c E_t[c]`.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    /// `(2n-1) x (2n-1)`, indexed by displacement `(di + n - 1, dj + n - 1)`.
    pub internal: Array2<Complex64>,
    /// `Nr x n^2`, receivers by row-major cells.
    pub external: Array2<Complex64>,
    pub self_term: Complex64,
}

/// Coefficient between two distinct cells at distance `rho`:
/// `(-j pi k a / 2) J1(k a) H0(k rho)`.
pub fn mutual_coefficient(k: Complex64, a: f64, rho: f64) -> Complex64 {
    disc_factor(k, a) * hankel2_0(k * rho)
}

/// Disc-integrated self coefficient: `(-j pi k a / 2) H1(k a) - 1`.
pub fn self_coefficient(k: Complex64, a: f64) -> Complex64 {
    let ka = k * a;
    let (_, h1) = hankel2_01(ka);
    Complex64::new(0.0, -PI / 2.0) * ka * h1 - 1.0
}

fn disc_factor(k: Complex64, a: f64) -> Complex64 {
    let ka = k * a;
    Complex64::new(0.0, -PI / 2.0) * ka * bessel_j1(ka)
}

pub fn build_green_kernel(config: &ExperimentConfig) -> Result<GreenKernel> {
    config.validate()?;
    let k = config.background.wavenumber(config.frequency)?;
    let grid = &config.grid;
    let n = grid.n;
    let d = grid.cell_size();
    let a = grid.equivalent_radius();
    let factor = disc_factor(k, a);
    let self_term = self_coefficient(k, a);

    // The internal kernel depends on di^2 + dj^2 only; evaluate each distance once.
    let m = 2 * n - 1;
    let mut by_dist = vec![None; 2 * (n - 1) * (n - 1) + 1];
    let mut internal = Array2::zeros((m, m));
    for r in 0..m {
        let di = r as i64 - (n as i64 - 1);
        for c in 0..m {
            let dj = c as i64 - (n as i64 - 1);
            let s = (di * di + dj * dj) as usize;
            internal[[r, c]] = if s == 0 {
                self_term
            } else {
                *by_dist[s].get_or_insert_with(|| factor * hankel2_0(k * (d * (s as f64).sqrt())))
            };
        }
    }

    let rx = config.array.positions();
    let centers = grid.centers();
    let mut external = Array2::zeros((rx.len(), centers.len()));
    for (i, p) in rx.iter().enumerate() {
        for (j, q) in centers.iter().enumerate() {
            let rho = (p[0] - q[0]).hypot(p[1] - q[1]);
            external[[i, j]] = factor * hankel2_0(k * rho);
        }
    }
    Ok(GreenKernel {
        internal,
        external,
        self_term,
    })
}
