//! Integer-order Bessel and Hankel functions of complex argument.
//!
//! `J_n` comes from Miller's backward recurrence normalised with
//! `J_0 + 2 sum J_2k = 1`. `Y_0` and `Y_1` use Neumann series in the
//! already-computed `J_2k`, and higher orders follow from the (stable) forward
//! recurrence. Valid for `z != 0` with `|arg z| < pi` and moderate `|Im z|`,
//! which covers every argument the forward model produces.

use num_complex::Complex64;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const RESCALE_AT: f64 = 1e100;

/// Start order for the backward recurrence.
fn miller_start(nmax: usize, z: Complex64) -> usize {
    let m = (nmax as f64).max(z.norm());
    let start = m + 20.0 + (40.0 * m).sqrt();
    // even start so the normalisation sum picks the right parity
    let s = start.ceil() as usize;
    s + (s & 1)
}

/// `J_0(z) ..= J_nmax(z)`, plus enough extra orders for the Neumann series.
fn bessel_j_extended(nmax: usize, z: Complex64) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    if z.norm() == 0.0 {
        let mut out = vec![zero; nmax + 1];
        out[0] = Complex64::new(1.0, 0.0);
        return out;
    }
    let start = miller_start(nmax, z);
    let mut f = vec![zero; start + 2];
    f[start] = Complex64::new(1e-30, 0.0);
    let inv_z = z.inv();
    for k in (1..=start).rev() {
        let next = f[k] * (2.0 * k as f64) * inv_z - f[k + 1];
        f[k - 1] = next;
        if next.norm() > RESCALE_AT {
            for v in f[k - 1..].iter_mut() {
                *v /= RESCALE_AT;
            }
        }
    }
    let mut norm = f[0];
    for k in (2..=start).step_by(2) {
        norm += f[k] * 2.0;
    }
    // scale-safe reciprocal: `Complex::inv` squares the modulus
    let m = norm.norm();
    let inv = (norm / m).conj() / m;
    f.truncate(start + 1);
    for v in f.iter_mut() {
        *v *= inv;
    }
    f
}

/// `J_0(z) ..= J_nmax(z)`.
pub fn bessel_j_seq(nmax: usize, z: Complex64) -> Vec<Complex64> {
    let mut j = bessel_j_extended(nmax, z);
    j.resize(nmax + 1, Complex64::new(0.0, 0.0));
    j
}

/// `(Y_0, Y_1)` from the Neumann series over a J sequence long enough to converge.
fn neumann_y01(z: Complex64, j: &[Complex64]) -> (Complex64, Complex64) {
    let log_term = (z / 2.0).ln() + EULER_GAMMA;
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut s1 = Complex64::new(0.0, 0.0);
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += j[2 * k] * (sign / k as f64);
        s1 += (j[2 * k - 1] - j[2 * k + 1]) * (sign / k as f64);
        k += 1;
    }
    let y0 = (log_term * j[0]) * (2.0 / PI) - s0 * (4.0 / PI);
    let y1 = -(j[0] / z - log_term * j[1]) * (2.0 / PI) + s1 * (2.0 / PI);
    (y0, y1)
}

/// `(J_0..=J_nmax, Y_0..=Y_nmax)`.
pub fn bessel_jy_seq(nmax: usize, z: Complex64) -> (Vec<Complex64>, Vec<Complex64>) {
    assert!(z.norm() > 0.0, "Y_n is singular at z = 0");
    let j_ext = bessel_j_extended(nmax.max(1), z);
    let (y0, y1) = neumann_y01(z, &j_ext);
    let mut y = Vec::with_capacity(nmax + 1);
    y.push(y0);
    if nmax >= 1 {
        y.push(y1);
    }
    let inv_z = z.inv();
    for n in 1..nmax {
        let next = y[n] * (2.0 * n as f64) * inv_z - y[n - 1];
        y.push(next);
    }
    let mut j = j_ext;
    j.truncate(nmax + 1);
    (j, y)
}

/// Hankel functions of the second kind `H_n^(2) = J_n - j Y_n`, orders `0..=nmax`.
pub fn hankel2_seq(nmax: usize, z: Complex64) -> Vec<Complex64> {
    let (j, y) = bessel_jy_seq(nmax, z);
    j.iter()
        .zip(y.iter())
        .map(|(a, b)| a - Complex64::i() * b)
        .collect()
}

pub fn bessel_j0(z: Complex64) -> Complex64 {
    bessel_j_extended(1, z)[0]
}

pub fn bessel_j1(z: Complex64) -> Complex64 {
    bessel_j_extended(1, z)[1]
}

/// `H_0^(2)(z)`.
pub fn hankel2_0(z: Complex64) -> Complex64 {
    let j = bessel_j_extended(1, z);
    let (y0, _) = neumann_y01(z, &j);
    j[0] - Complex64::i() * y0
}

/// `H_1^(2)(z)`.
pub fn hankel2_1(z: Complex64) -> Complex64 {
    let j = bessel_j_extended(1, z);
    let (_, y1) = neumann_y01(z, &j);
    j[1] - Complex64::i() * y1
}

/// `(H_0^(2)(z), H_1^(2)(z))` in one pass.
pub fn hankel2_01(z: Complex64) -> (Complex64, Complex64) {
    let j = bessel_j_extended(1, z);
    let (y0, y1) = neumann_y01(z, &j);
    (j[0] - Complex64::i() * y0, j[1] - Complex64::i() * y1)
}
