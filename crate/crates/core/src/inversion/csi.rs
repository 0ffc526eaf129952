use num_complex::Complex64;
use std::time::Instant;

use super::{check_data, project, rows, to_map, CsiConfig, InitialGuess, InversionResult};
use crate::error::{Error, Result};
use crate::forward::krylov::dot;
use crate::forward::{ForwardModel, ScatteringMatrix};
use crate::medium::DielectricMap;

type C = Complex64;

fn zeros(n: usize) -> Vec<C> {
    vec![C::new(0.0, 0.0); n]
}

fn norm2(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Back-propagated sources `w_v = gamma_v G_e^H f_v`, with `gamma_v` minimising
/// `||f_v - gamma G_e G_e^H f_v||`.
fn backpropagated_sources(model: &ForwardModel, data: &[Vec<C>]) -> Vec<Vec<C>> {
    data.iter()
        .map(|f| {
            let b = model.radiate_adjoint(f);
            let gb = model.radiate(&b);
            let den = norm2(&gb);
            if den == 0.0 {
                return zeros(b.len());
            }
            let gamma = norm2(&b) / den;
            b.into_iter().map(|z| z * gamma).collect()
        })
        .collect()
}

/// Pointwise least-squares contrast `sum_v w_v conj(E_v) / sum_v |E_v|^2`.
fn ls_contrast(sources: &[Vec<C>], totals: &[Vec<C>]) -> Vec<C> {
    let n = sources[0].len();
    let mut num = zeros(n);
    let mut den = vec![0.0; n];
    for (w, e) in sources.iter().zip(totals) {
        for i in 0..n {
            num[i] += w[i] * e[i].conj();
            den[i] += e[i].norm_sqr();
        }
    }
    num.iter()
        .zip(&den)
        .map(|(a, &d)| if d > 0.0 { a / d } else { C::new(0.0, 0.0) })
        .collect()
}

/// Contrast of the back-propagation initial guess (also usable as a DBIM start).
pub(super) fn backpropagated_contrast(model: &ForwardModel, meas: &ScatteringMatrix, projection: bool) -> Vec<C> {
    let data = rows(meas);
    let w = backpropagated_sources(model, &data);
    let totals: Vec<Vec<C>> = w
        .iter()
        .enumerate()
        .map(|(v, wv)| {
            let mut gw = zeros(wv.len());
            model.apply_internal(wv, &mut gw);
            model.incident(v).flat().iter().zip(&gw).map(|(a, b)| a + b).collect()
        })
        .collect();
    let chi = ls_contrast(&w, &totals);
    if projection {
        project(model, &chi)
    } else {
        chi
    }
}

struct State<'a> {
    model: &'a ForwardModel,
    data: Vec<Vec<C>>,
    eta_s: f64,
    w: Vec<Vec<C>>,
    /// `G_D w_v`, kept in sync with `w`.
    gw: Vec<Vec<C>>,
    chi: Vec<C>,
}

impl State<'_> {
    fn incident(&self, v: usize) -> &[C] {
        self.model.incident(v).flat()
    }

    fn eta_d(&self, chi: &[C]) -> f64 {
        let s: f64 = (0..self.w.len())
            .map(|v| chi.iter().zip(self.incident(v)).map(|(c, e)| (c * e).norm_sqr()).sum::<f64>())
            .sum();
        if s > 0.0 {
            1.0 / s
        } else {
            // zero contrast: fall back to the incident energy
            1.0 / (0..self.w.len()).map(|v| norm2(self.incident(v))).sum::<f64>()
        }
    }

    fn data_error(&self, v: usize) -> Vec<C> {
        let gs = self.model.radiate(&self.w[v]);
        self.data[v].iter().zip(&gs).map(|(f, g)| f - g).collect()
    }

    /// `chi E_v - w_v` with `E_v = E_i + G_D w_v`.
    fn object_error(&self, v: usize, chi: &[C]) -> Vec<C> {
        let ei = self.incident(v);
        (0..chi.len())
            .map(|i| chi[i] * (ei[i] + self.gw[v][i]) - self.w[v][i])
            .collect()
    }

    fn functional_with(&self, chi: &[C]) -> f64 {
        let eta_d = self.eta_d(chi);
        (0..self.w.len())
            .map(|v| self.eta_s * norm2(&self.data_error(v)) + eta_d * norm2(&self.object_error(v, chi)))
            .sum()
    }

    fn functional(&self) -> f64 {
        self.functional_with(&self.chi)
    }

    fn totals(&self) -> Vec<Vec<C>> {
        (0..self.w.len())
            .map(|v| self.incident(v).iter().zip(&self.gw[v]).map(|(a, b)| a + b).collect())
            .collect()
    }
}

/// Contrast source inversion.
///
/// Alternates a Polak-Ribiere conjugate-gradient update of every view's
/// contrast source (complex step from an exact line search on the quadratic
/// functional) with the closed-form least-squares contrast, optionally
/// projected onto physical bounds. The normalisation `eta_D` depends on the
/// contrast, so the contrast update is backtracked towards the previous
/// contrast whenever it would raise the functional.
pub fn csi_invert(model: &ForwardModel, meas: &ScatteringMatrix, cfg: &CsiConfig) -> Result<InversionResult> {
    let start = Instant::now();
    cfg.validate()?;
    check_data(model, meas)?;
    let grid = model.grid();
    let n = grid.len();
    if meas.norm() == 0.0 {
        return Ok(InversionResult {
            estimate: DielectricMap::uniform(grid, &model.config.background),
            residuals: Vec::new(),
            functional: Vec::new(),
            iterations: 0,
            seconds: start.elapsed().as_secs_f64(),
            lambda: None,
        });
    }
    let data = rows(meas);
    let nv = data.len();
    let eta_s = 1.0 / data.iter().map(|f| norm2(f)).sum::<f64>();
    let w = match cfg.initial_guess {
        InitialGuess::BackPropagation => backpropagated_sources(model, &data),
        InitialGuess::Background => vec![zeros(n); nv],
    };
    let gw: Vec<Vec<C>> = w
        .iter()
        .map(|wv| {
            let mut g = zeros(n);
            model.apply_internal(wv, &mut g);
            g
        })
        .collect();
    let mut st = State {
        model,
        data,
        eta_s,
        w,
        gw,
        chi: zeros(n),
    };
    let chi0 = ls_contrast(&st.w, &st.totals());
    st.chi = if cfg.projection { project(model, &chi0) } else { chi0 };

    let mut functional = Vec::with_capacity(cfg.iterations);
    let mut residuals = Vec::with_capacity(cfg.iterations);
    let mut g_old: Vec<Vec<C>> = vec![zeros(n); nv];
    let mut d: Vec<Vec<C>> = vec![zeros(n); nv];
    let mut g_old_norm = 0.0;
    let mut f_prev = st.functional();

    for it in 1..=cfg.iterations {
        // gradient with respect to the sources
        let eta_d = st.eta_d(&st.chi);
        let chi_conj: Vec<C> = st.chi.iter().map(|c| c.conj()).collect();
        let mut g: Vec<Vec<C>> = Vec::with_capacity(nv);
        for v in 0..nv {
            let rho = st.data_error(v);
            let r = st.object_error(v, &st.chi);
            let gs_rho = model.radiate_adjoint(&rho);
            let cr: Vec<C> = chi_conj.iter().zip(&r).map(|(c, x)| c * x).collect();
            let mut gd = zeros(n);
            model.apply_internal_adjoint(&cr, &mut gd);
            g.push(
                (0..n)
                    .map(|i| -gs_rho[i] * eta_s - (r[i] - gd[i]) * eta_d)
                    .collect(),
            );
        }
        let g_norm: f64 = g.iter().map(|x| norm2(x)).sum();
        let beta = if it == 1 || g_old_norm == 0.0 {
            0.0
        } else {
            let num: f64 = g
                .iter()
                .zip(&g_old)
                .map(|(a, b)| {
                    let diff: Vec<C> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                    dot(&diff, a).re
                })
                .sum();
            (num / g_old_norm).max(0.0)
        };
        for v in 0..nv {
            for i in 0..n {
                d[v][i] = g[v][i] + d[v][i] * beta;
            }
        }
        // exact complex line search per view, moving along -d
        for v in 0..nv {
            if norm2(&d[v]) == 0.0 {
                continue;
            }
            let rho = st.data_error(v);
            let r = st.object_error(v, &st.chi);
            let a = model.radiate(&d[v]);
            let mut gd = zeros(n);
            model.apply_internal(&d[v], &mut gd);
            // moving w by -alpha d changes the object error by alpha b
            let b: Vec<C> = (0..n).map(|i| d[v][i] - st.chi[i] * gd[i]).collect();
            // minimise eta_s ||rho + alpha a||^2 + eta_d ||r + alpha b||^2
            let num = dot(&a, &rho) * eta_s + dot(&b, &r) * eta_d;
            let den = norm2(&a) * eta_s + norm2(&b) * eta_d;
            if den == 0.0 {
                continue;
            }
            let alpha = -num / den;
            for i in 0..n {
                st.w[v][i] -= alpha * d[v][i];
                st.gw[v][i] -= alpha * gd[i];
            }
        }
        g_old = g;
        g_old_norm = g_norm;

        // contrast update with safeguard
        let f_after_w = st.functional();
        let target = ls_contrast(&st.w, &st.totals());
        let target = if cfg.projection { project(model, &target) } else { target };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let cand: Vec<C> = st.chi.iter().zip(&target).map(|(c, x)| c + (x - c) * t).collect();
            let cand = if cfg.projection { project(model, &cand) } else { cand };
            let f = st.functional_with(&cand);
            if f <= f_after_w {
                st.chi = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            log::trace!("CSI iteration {it}: contrast kept");
        }
        let f = st.functional();
        if !f.is_finite() {
            return Err(Error::Numerical(format!("CSI functional became non-finite at iteration {it}")));
        }
        debug_assert!(f <= f_prev * (1.0 + 1e-12));
        f_prev = f;
        functional.push(f);
        let fit: f64 = (0..nv).map(|v| norm2(&st.data_error(v))).sum::<f64>();
        residuals.push((fit * eta_s).sqrt());
    }
    Ok(InversionResult {
        estimate: to_map(model, &st.chi),
        iterations: functional.len(),
        residuals,
        functional,
        seconds: start.elapsed().as_secs_f64(),
        lambda: None,
    })
}
