//! Square 2D transforms and zero-padded convolution on top of `rustfft`.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse transforms of a `size x size` row-major buffer.
#[derive(Clone)]
pub struct Fft2 {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("size", &self.size).finish()
    }
}

impl Fft2 {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        let n = self.size;
        assert_eq!(buf.len(), n * n);
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        transpose_in_place(buf, n);
        plan.process_with_scratch(buf, &mut scratch);
        transpose_in_place(buf, n);
    }

    /// Unnormalised forward transform.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(&self.forward, buf);
    }

    /// Inverse transform including the `1 / size^2` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(&self.inverse, buf);
        let scale = 1.0 / (self.size * self.size) as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    pub fn forward_array(&self, a: &Array2<Complex64>) -> Array2<Complex64> {
        let mut buf: Vec<Complex64> = a.iter().copied().collect();
        self.forward(&mut buf);
        Array2::from_shape_vec((self.size, self.size), buf).expect("square buffer")
    }
}

fn transpose_in_place(buf: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            buf.swap(r * n + c, c * n + r);
        }
    }
}

/// Linear convolution of `n x n` sources with a translation-invariant kernel
/// defined on displacements `-(n-1)..=(n-1)` in each axis.
#[derive(Debug, Clone)]
pub struct Convolver {
    n: usize,
    fft: Fft2,
    kernel_hat: Vec<Complex64>,
}

impl Convolver {
    /// `kernel[[di + n - 1, dj + n - 1]]` is the coupling for displacement `(di, dj)`.
    pub fn new(kernel: &Array2<Complex64>) -> Self {
        let (kr, kc) = kernel.dim();
        assert!(kr == kc && kr % 2 == 1, "kernel must be (2n-1) x (2n-1)");
        let n = (kr + 1) / 2;
        let size = 2 * n;
        let fft = Fft2::new(size);
        let mut buf = vec![Complex64::new(0.0, 0.0); size * size];
        let off = n as isize - 1;
        for ((r, c), &v) in kernel.indexed_iter() {
            let di = r as isize - off;
            let dj = c as isize - off;
            let pr = di.rem_euclid(size as isize) as usize;
            let pc = dj.rem_euclid(size as isize) as usize;
            buf[pr * size + pc] = v;
        }
        fft.forward(&mut buf);
        Convolver {
            n,
            fft,
            kernel_hat: buf,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `out[p] = sum_q kernel(p - q) src[q]` over row-major `n x n` slices.
    pub fn apply(&self, src: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        let size = self.fft.size();
        assert_eq!(src.len(), n * n);
        assert_eq!(out.len(), n * n);
        let mut buf = vec![Complex64::new(0.0, 0.0); size * size];
        for r in 0..n {
            buf[r * size..r * size + n].copy_from_slice(&src[r * n..(r + 1) * n]);
        }
        self.fft.forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(self.kernel_hat.iter()) {
            *b *= k;
        }
        self.fft.inverse(&mut buf);
        for r in 0..n {
            out[r * n..(r + 1) * n].copy_from_slice(&buf[r * size..r * size + n]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo(i: usize) -> Complex64 {
        let x = (i as f64 * 0.618_033_988_7).fract();
        let y = (i as f64 * 0.414_213_562_3).fract();
        Complex64::new(x - 0.5, y - 0.5)
    }

    #[test]
    fn forward_then_inverse_is_identity() {
        let f = Fft2::new(12);
        let orig: Vec<Complex64> = (0..144).map(pseudo).collect();
        let mut buf = orig.clone();
        f.forward(&mut buf);
        f.inverse(&mut buf);
        for (a, b) in buf.iter().zip(orig.iter()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let n = 6;
        let k = Array2::from_shape_fn((2 * n - 1, 2 * n - 1), |(r, c)| pseudo(r * 31 + c * 7 + 3));
        let conv = Convolver::new(&k);
        let src: Vec<Complex64> = (0..n * n).map(|i| pseudo(i + 100)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        conv.apply(&src, &mut out);
        for pr in 0..n {
            for pc in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for qr in 0..n {
                    for qc in 0..n {
                        let kr = pr + n - 1 - qr;
                        let kc = pc + n - 1 - qc;
                        acc += k[[kr, kc]] * src[qr * n + qc];
                    }
                }
                assert!((acc - out[pr * n + pc]).norm() < 1e-12 * acc.norm().max(1.0));
            }
        }
    }
}
