//! Shared test oracles. Everything here is computed independently of the
//! library's special-function and solver code.
#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64 as C;
use std::f64::consts::PI;

use mwtomo::config::ExperimentConfig;
use mwtomo::medium::{complex_permittivity, DielectricMap, MU0};
use mwtomo::Grid;

const EULER: f64 = 0.577_215_664_901_532_9;

/// `J_n(z)` by its ascending power series.
pub fn j_series(n: usize, z: C) -> C {
    let h = z / 2.0;
    let mut lead = C::new(1.0, 0.0);
    for k in 1..=n {
        lead *= h / k as f64;
    }
    let h2 = h * h;
    let mut term = lead;
    let mut sum = term;
    for k in 1..400 {
        term *= -h2 / (k as f64 * (k + n) as f64);
        sum += term;
        if term.norm() < 1e-18 * sum.norm().max(1e-300) && k > 4 {
            break;
        }
    }
    sum
}

/// `Y_0(z)` and `Y_1(z)` by their ascending series.
fn y01(z: C) -> (C, C) {
    let h = z / 2.0;
    let h2 = h * h;
    let log_term = h.ln() + EULER;
    let j0 = j_series(0, z);
    let j1 = j_series(1, z);

    let mut s0 = C::new(0.0, 0.0);
    let mut term = C::new(1.0, 0.0);
    let mut harmonic = 0.0;
    for k in 1..400 {
        term *= -h2 / (k as f64 * k as f64);
        harmonic += 1.0 / k as f64;
        let add = -term * harmonic;
        s0 += add;
        if add.norm() < 1e-18 * s0.norm() && k > 4 {
            break;
        }
    }
    let y0 = (log_term * j0 + s0) * (2.0 / PI);

    // psi(k+1) + psi(k+2) = -2 gamma + H_k + H_{k+1}
    let mut s1 = C::new(0.0, 0.0);
    let mut term = h;
    let mut hk = 0.0;
    for k in 0..400 {
        if k > 0 {
            term *= -h2 / (k as f64 * (k + 1) as f64);
            hk += 1.0 / k as f64;
        }
        let psi = -2.0 * EULER + hk + hk + 1.0 / (k + 1) as f64;
        let add = term * psi;
        s1 += add;
        if add.norm() < 1e-18 * s1.norm() && k > 4 {
            break;
        }
    }
    let y1 = -(2.0 / PI) / z + (2.0 / PI) * h.ln() * j1 - s1 / PI;
    (y0, y1)
}

/// `H_n^(2)(z)` for `n = 0..=nmax`.
pub fn h2_seq(nmax: usize, z: C) -> Vec<C> {
    let (y0, y1) = y01(z);
    let mut y = vec![y0, y1];
    for n in 1..nmax {
        let next = y[n] * (2.0 * n as f64) / z - y[n - 1];
        y.push(next);
    }
    (0..=nmax).map(|n| j_series(n, z) - C::i() * y[n]).collect()
}

pub fn j_seq(nmax: usize, z: C) -> Vec<C> {
    (0..=nmax).map(|n| j_series(n, z)).collect()
}

/// `Z_n'` from the sequence using `Z_n' = Z_{n-1} - (n / z) Z_n`, with `Z_0' = -Z_1`.
fn derivs(z: C, seq: &[C]) -> Vec<C> {
    (0..seq.len() - 1)
        .map(|n| if n == 0 { -seq[1] } else { seq[n - 1] - seq[n] * (n as f64 / z) })
        .collect()
}

/// Partial-wave solution for a homogeneous circular cylinder centred at the
/// origin, illuminated by the array's line sources (amplitude `-(w mu0 / 4)`).
pub struct CylinderOracle {
    pub nmax: usize,
    amp: C,
    k_b: C,
    k_d: C,
    c: Vec<C>,
    d: Vec<C>,
}

impl CylinderOracle {
    pub fn new(cfg: &ExperimentConfig, radius: f64, eps_r: f64, sigma: f64, nmax: usize) -> Self {
        let w = 2.0 * PI * cfg.frequency;
        let k0 = w / 299_792_458.0;
        let eps_b = complex_permittivity(cfg.background.eps_r, cfg.background.sigma, cfg.frequency).unwrap();
        let eps_d = complex_permittivity(eps_r, sigma, cfg.frequency).unwrap();
        let root = |e: C| {
            let s = e.sqrt();
            if s.re < 0.0 {
                -s
            } else {
                s
            }
        };
        let k_b = k0 * root(eps_b);
        let k_d = k0 * root(eps_d);
        let xb = k_b * radius;
        let xd = k_d * radius;
        let jb = j_seq(nmax + 1, xb);
        let hb = h2_seq(nmax + 1, xb);
        let jd = j_seq(nmax + 1, xd);
        let (djb, dhb, djd) = (derivs(xb, &jb), derivs(xb, &hb), derivs(xd, &jd));
        let mut c = Vec::with_capacity(nmax + 1);
        let mut d = Vec::with_capacity(nmax + 1);
        for n in 0..=nmax {
            let num = k_d * djd[n] * jb[n] - k_b * djb[n] * jd[n];
            let den = k_b * dhb[n] * jd[n] - k_d * djd[n] * hb[n];
            let cn = num / den;
            c.push(cn);
            d.push((jb[n] + cn * hb[n]) / jd[n]);
        }
        CylinderOracle {
            nmax,
            amp: C::new(-w * MU0 / 4.0, 0.0),
            k_b,
            k_d,
            c,
            d,
        }
    }

    fn series(&self, coef: &[C], radial: &[C], src: &[C], dphi: f64) -> C {
        let mut s = coef[0] * src[0] * radial[0];
        for n in 1..=self.nmax {
            s += coef[n] * src[n] * radial[n] * (2.0 * (n as f64 * dphi).cos());
        }
        s * self.amp
    }

    /// Scattered field at `p` (outside the cylinder) for a source at `tx`.
    pub fn scattered(&self, tx: [f64; 2], p: [f64; 2]) -> C {
        let (rt, pt) = polar(tx);
        let (r, ph) = polar(p);
        let src = h2_seq(self.nmax, self.k_b * rt);
        let rad = h2_seq(self.nmax, self.k_b * r);
        self.series(&self.c, &rad, &src, ph - pt)
    }

    /// Total field at `p` inside the cylinder for a source at `tx`.
    pub fn interior(&self, tx: [f64; 2], p: [f64; 2]) -> C {
        let (rt, pt) = polar(tx);
        let (r, ph) = polar(p);
        let src = h2_seq(self.nmax, self.k_b * rt);
        let rad = j_seq(self.nmax, self.k_d * r);
        self.series(&self.d, &rad, &src, ph - pt)
    }

    /// Incident field, as a series, for checking the expansion itself.
    pub fn incident(&self, tx: [f64; 2], p: [f64; 2]) -> C {
        let (rt, pt) = polar(tx);
        let (r, ph) = polar(p);
        let src = h2_seq(self.nmax, self.k_b * rt);
        let rad = j_seq(self.nmax, self.k_b * r);
        let ones = vec![C::new(1.0, 0.0); self.nmax + 1];
        self.series(&ones, &rad, &src, ph - pt)
    }
}

fn polar(p: [f64; 2]) -> (f64, f64) {
    (p[0].hypot(p[1]), p[1].atan2(p[0]))
}

/// Disc of the given properties centred at the origin on top of the background.
pub fn disc_map(cfg: &ExperimentConfig, radius: f64, eps_r: f64, sigma: f64) -> DielectricMap {
    let grid = cfg.grid;
    let mut eps = Array2::from_elem(grid.shape(), cfg.background.eps_r);
    let mut sig = Array2::from_elem(grid.shape(), cfg.background.sigma);
    for (r, c) in disc_cells(&grid, radius) {
        eps[[r, c]] = eps_r;
        sig[[r, c]] = sigma;
    }
    DielectricMap::new(grid, eps, sig).unwrap()
}

pub fn disc_cells(grid: &Grid, radius: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..grid.n {
        for c in 0..grid.n {
            let p = grid.cell_center(r, c);
            if p[0].hypot(p[1]) <= radius {
                out.push((r, c));
            }
        }
    }
    out
}

/// `||a - b|| / ||b||`.
pub fn rel_err(a: &[C], b: &[C]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Equal-area radius so the staircased disc and the analytic cylinder share
/// their cross-section.
pub fn staircase_radius(grid: &Grid, radius: f64) -> f64 {
    let n = disc_cells(grid, radius).len() as f64;
    (n * grid.cell_area() / PI).sqrt()
}
