//! Matrix-free Krylov solvers for complex square systems.

use num_complex::Complex64;

use crate::config::KrylovMethod;
use crate::error::{Error, Result};

type C = Complex64;

/// A linear operator known only through its products.
pub trait LinearMap {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C], y: &mut [C]);
    fn apply_adjoint(&self, x: &[C], y: &mut [C]);
}

/// The adjoint of a map, itself a map.
pub struct Adjoint<'a, M: LinearMap>(pub &'a M);

impl<M: LinearMap> LinearMap for Adjoint<'_, M> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[C], y: &mut [C]) {
        self.0.apply_adjoint(x, y)
    }
    fn apply_adjoint(&self, x: &[C], y: &mut [C]) {
        self.0.apply(x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||`.
    pub relative_residual: f64,
    /// Relative residual after each iteration (index 0 is the initial guess).
    pub history: Vec<f64>,
}

pub fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: C, x: &[C], y: &mut [C]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn residual(op: &dyn LinearMap, b: &[C], x: &[C]) -> Vec<C> {
    let mut ax = vec![C::new(0.0, 0.0); b.len()];
    op.apply(x, &mut ax);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// Solve `A x = b` to `||b - A x|| <= tol ||b||`, starting from `x`.
///
/// BiCGSTAB falls back to CGNR from its last iterate if it breaks down or
/// runs out of iterations.
pub fn solve(
    op: &dyn LinearMap,
    b: &[C],
    x: &mut [C],
    tol: f64,
    max_iter: usize,
    method: KrylovMethod,
) -> Result<SolveStats> {
    match method {
        KrylovMethod::Cgnr => cgnr(op, b, x, tol, max_iter),
        KrylovMethod::Bicgstab => match bicgstab(op, b, x, tol, max_iter) {
            Ok(s) => Ok(s),
            Err(e) => {
                log::debug!("bicgstab failed ({e}); continuing with cgnr");
                let mut s = cgnr(op, b, x, tol, max_iter)?;
                s.history.insert(0, f64::NAN);
                Ok(s)
            }
        },
    }
}

/// Conjugate gradients on the normal equations (CGLS form). The residual
/// `||b - A x||` is non-increasing.
pub fn cgnr(op: &dyn LinearMap, b: &[C], x: &mut [C], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.fill(C::new(0.0, 0.0));
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
            history: vec![0.0],
        });
    }
    let mut r = residual(op, b, x);
    let mut rel = norm(&r) / bnorm;
    let mut history = vec![rel];
    if rel <= tol {
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: rel,
            history,
        });
    }
    let mut s = vec![C::new(0.0, 0.0); n];
    op.apply_adjoint(&r, &mut s);
    let mut p = s.clone();
    let mut gamma = dot(&s, &s).re;
    let mut q = vec![C::new(0.0, 0.0); n];
    for it in 1..=max_iter {
        op.apply(&p, &mut q);
        let qq = dot(&q, &q).re;
        if qq == 0.0 || gamma == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        axpy(C::new(alpha, 0.0), &p, x);
        axpy(C::new(-alpha, 0.0), &q, &mut r);
        rel = norm(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok(SolveStats {
                iterations: it,
                relative_residual: rel,
                history,
            });
        }
        op.apply_adjoint(&r, &mut s);
        let gamma_new = dot(&s, &s).re;
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + *pi * beta;
        }
    }
    Err(Error::NotConverged {
        iterations: history.len() - 1,
        residual: rel,
    })
}

/// Stabilised biconjugate gradients.
pub fn bicgstab(op: &dyn LinearMap, b: &[C], x: &mut [C], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = b.len();
    let zero = C::new(0.0, 0.0);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.fill(zero);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
            history: vec![0.0],
        });
    }
    let mut r = residual(op, b, x);
    let mut rel = norm(&r) / bnorm;
    let mut history = vec![rel];
    if rel <= tol {
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: rel,
            history,
        });
    }
    let r_hat = r.clone();
    let mut rho = C::new(1.0, 0.0);
    let mut alpha = C::new(1.0, 0.0);
    let mut omega = C::new(1.0, 0.0);
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    let mut s = vec![zero; n];
    let mut t = vec![zero; n];
    let breakdown = |what: &str, it: usize| Error::Numerical(format!("bicgstab breakdown ({what}) at iteration {it}"));
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.norm() < 1e-300 {
            return Err(breakdown("rho", it));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for ((pi, ri), vi) in p.iter_mut().zip(&r).zip(&v) {
            *pi = ri + beta * (*pi - omega * vi);
        }
        op.apply(&p, &mut v);
        let rv = dot(&r_hat, &v);
        if rv.norm() == 0.0 {
            return Err(breakdown("r_hat . v", it));
        }
        alpha = rho / rv;
        for ((si, ri), vi) in s.iter_mut().zip(&r).zip(&v) {
            *si = ri - alpha * vi;
        }
        let snorm = norm(&s) / bnorm;
        if snorm <= tol {
            axpy(alpha, &p, x);
            r.copy_from_slice(&s);
            history.push(snorm);
            return finish(op, b, x, bnorm, tol, it, history);
        }
        op.apply(&s, &mut t);
        let tt = dot(&t, &t).re;
        if tt == 0.0 {
            return Err(breakdown("t = 0", it));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm(&r) / bnorm;
        history.push(rel);
        if !rel.is_finite() {
            return Err(breakdown("non-finite residual", it));
        }
        if rel <= tol {
            return finish(op, b, x, bnorm, tol, it, history);
        }
        if omega.norm() == 0.0 {
            return Err(breakdown("omega", it));
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: rel,
    })
}

/// Confirm the recursive residual against the true one.
fn finish(
    op: &dyn LinearMap,
    b: &[C],
    x: &[C],
    bnorm: f64,
    tol: f64,
    it: usize,
    history: Vec<f64>,
) -> Result<SolveStats> {
    let true_rel = norm(&residual(op, b, x)) / bnorm;
    if true_rel <= tol * 1.5 {
        Ok(SolveStats {
            iterations: it,
            relative_residual: true_rel,
            history,
        })
    } else {
        Err(Error::Numerical(format!(
            "bicgstab residual drift: recursive {:.2e}, true {true_rel:.2e}",
            history.last().copied().unwrap_or(f64::NAN)
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(Vec<Vec<C>>);

    impl LinearMap for Dense {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[C], y: &mut [C]) {
            for (yi, row) in y.iter_mut().zip(&self.0) {
                *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
            }
        }
        fn apply_adjoint(&self, x: &[C], y: &mut [C]) {
            for (j, yj) in y.iter_mut().enumerate() {
                *yj = self.0.iter().zip(x).map(|(row, xi)| row[j].conj() * xi).sum();
            }
        }
    }

    fn system() -> (Dense, Vec<C>) {
        let n = 12;
        let a = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let v = ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5;
                        let w = ((i * 5 + j * 2) % 13) as f64 / 13.0 - 0.5;
                        C::new(v, w) * 0.3 + if i == j { C::new(2.0, 0.5) } else { C::new(0.0, 0.0) }
                    })
                    .collect()
            })
            .collect();
        let b = (0..n).map(|i| C::new(i as f64, 1.0 - i as f64 * 0.2)).collect();
        (Dense(a), b)
    }

    #[test]
    fn both_methods_reach_tolerance() {
        let (a, b) = system();
        for method in [KrylovMethod::Cgnr, KrylovMethod::Bicgstab] {
            let mut x = vec![C::new(0.0, 0.0); b.len()];
            let s = solve(&a, &b, &mut x, 1e-10, 500, method).unwrap();
            assert!(s.relative_residual <= 1e-10);
            assert!(norm(&residual(&a, &b, &x)) / norm(&b) <= 2e-10);
        }
    }

    #[test]
    fn cgnr_residual_is_monotone() {
        let (a, b) = system();
        let mut x = vec![C::new(0.0, 0.0); b.len()];
        let s = cgnr(&a, &b, &mut x, 1e-12, 500).unwrap();
        assert!(s.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn adjoint_wrapper_swaps() {
        let (a, _) = system();
        let x: Vec<C> = (0..12).map(|i| C::new(1.0, i as f64)).collect();
        let y: Vec<C> = (0..12).map(|i| C::new(i as f64, -1.0)).collect();
        let mut ax = vec![C::new(0.0, 0.0); 12];
        let mut ahy = vec![C::new(0.0, 0.0); 12];
        a.apply(&x, &mut ax);
        Adjoint(&a).apply(&y, &mut ahy);
        assert!((dot(&y, &ax) - dot(&ahy, &x)).norm() < 1e-10);
    }
}
