//! Method-of-moments forward solver.
//!
//! Cells are replaced by equal-area discs so the cell-integrated 2D Green's
//! function has closed forms. The domain equation `E_t = E_i + G (chi E_t)` is
//! solved matrix-free: `G` is a translation-invariant convolution applied with
//! zero-padded FFTs inside a Krylov iteration. Time convention `e^{+j w t}`,
//! outgoing waves use `H_0^(2)`.

mod dense;
mod green;
pub mod krylov;
mod noise;
mod smatrix;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::config::{ExperimentConfig, KrylovMethod};
use crate::error::{Error, Result};
use crate::fft::Convolver;
use crate::grid::Grid;
use crate::medium::{contrast_of, ContrastMap, MU0};
use crate::phantom::Phantom;
use crate::special::hankel2_0;

pub use dense::{dense_mom_solve, MAX_DENSE_N};
pub use green::{build_green_kernel, mutual_coefficient, self_coefficient, GreenKernel};
pub use krylov::{LinearMap, SolveStats};
pub use noise::add_awgn;
pub use smatrix::ScatteringMatrix;

type C = Complex64;

/// Complex field over the grid for one transmitter view (V/m).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub grid: Grid,
    pub values: Array2<C>,
    pub view_index: usize,
}

impl FieldMap {
    pub fn flat(&self) -> &[C] {
        self.values.as_slice().expect("standard layout")
    }
}

/// Incident field of a unit line current at transmitter `view`:
/// `E_i(r) = -(w mu0 / 4) H0(k_b |r - r_tx|)`.
pub fn incident_field(config: &ExperimentConfig, view: usize) -> Result<FieldMap> {
    config.validate()?;
    if view >= config.array.count {
        return Err(Error::invalid(format!(
            "view {view} out of range for {} antennas",
            config.array.count
        )));
    }
    let k = config.background.wavenumber(config.frequency)?;
    let amp = -2.0 * PI * config.frequency * MU0 / 4.0;
    let tx = config.array.position(view);
    let grid = config.grid;
    let tiny = 1e-9 * grid.cell_size();
    let mut values = Array2::zeros(grid.shape());
    for ((r, c), v) in values.indexed_iter_mut() {
        let p = grid.cell_center(r, c);
        let rho = (p[0] - tx[0]).hypot(p[1] - tx[1]);
        if rho < tiny {
            return Err(Error::invalid(format!(
                "transmitter {view} coincides with the center of cell ({r}, {c})"
            )));
        }
        *v = hankel2_0(k * rho) * amp;
    }
    Ok(FieldMap {
        grid,
        values,
        view_index: view,
    })
}

/// `T = I - G diag(chi)`, the total-field operator.
pub struct TotalFieldOperator<'a> {
    conv: &'a Convolver,
    chi: &'a [C],
}

impl LinearMap for TotalFieldOperator<'_> {
    fn dim(&self) -> usize {
        self.chi.len()
    }
    fn apply(&self, x: &[C], y: &mut [C]) {
        let w: Vec<C> = x.iter().zip(self.chi).map(|(a, b)| a * b).collect();
        self.conv.apply(&w, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi - *yi;
        }
    }
    fn apply_adjoint(&self, x: &[C], y: &mut [C]) {
        apply_g_adjoint(self.conv, x, y);
        for ((yi, xi), c) in y.iter_mut().zip(x).zip(self.chi) {
            *yi = xi - c.conj() * *yi;
        }
    }
}

/// `C = I - diag(chi) G`, the contrast-source operator.
pub struct ContrastSourceOperator<'a> {
    conv: &'a Convolver,
    chi: &'a [C],
}

impl LinearMap for ContrastSourceOperator<'_> {
    fn dim(&self) -> usize {
        self.chi.len()
    }
    fn apply(&self, x: &[C], y: &mut [C]) {
        self.conv.apply(x, y);
        for ((yi, xi), c) in y.iter_mut().zip(x).zip(self.chi) {
            *yi = xi - c * *yi;
        }
    }
    fn apply_adjoint(&self, x: &[C], y: &mut [C]) {
        let w: Vec<C> = x.iter().zip(self.chi).map(|(a, b)| b.conj() * a).collect();
        apply_g_adjoint(self.conv, &w, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi - *yi;
        }
    }
}

/// The kernel is symmetric, so `G^H x = conj(G conj(x))`.
fn apply_g_adjoint(conv: &Convolver, x: &[C], y: &mut [C]) {
    let xc: Vec<C> = x.iter().map(|z| z.conj()).collect();
    conv.apply(&xc, y);
    for v in y.iter_mut() {
        *v = v.conj();
    }
}

/// Precomputed kernels and incident fields for one experiment.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    pub config: ExperimentConfig,
    /// Background wavenumber (rad/m).
    pub k_b: C,
    pub kernel: GreenKernel,
    conv: Convolver,
    incident: Vec<FieldMap>,
}

impl ForwardModel {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let kernel = build_green_kernel(config)?;
        let conv = Convolver::new(&kernel.internal);
        let incident = (0..config.array.count)
            .map(|v| incident_field(config, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(ForwardModel {
            config: config.clone(),
            k_b: config.background.wavenumber(config.frequency)?,
            kernel,
            conv,
            incident,
        })
    }

    pub fn grid(&self) -> Grid {
        self.config.grid
    }

    pub fn n_views(&self) -> usize {
        self.incident.len()
    }

    pub fn n_receivers(&self) -> usize {
        self.kernel.external.nrows()
    }

    pub fn incident(&self, view: usize) -> &FieldMap {
        &self.incident[view]
    }

    /// `G x` (internal operator, zero-padded FFT convolution).
    pub fn apply_internal(&self, x: &[C], y: &mut [C]) {
        self.conv.apply(x, y);
    }

    pub fn apply_internal_adjoint(&self, x: &[C], y: &mut [C]) {
        apply_g_adjoint(&self.conv, x, y);
    }

    pub fn total_field_operator<'a>(&'a self, chi: &'a [C]) -> TotalFieldOperator<'a> {
        TotalFieldOperator { conv: &self.conv, chi }
    }

    pub fn contrast_source_operator<'a>(&'a self, chi: &'a [C]) -> ContrastSourceOperator<'a> {
        ContrastSourceOperator { conv: &self.conv, chi }
    }

    /// `G_e w`: receiver samples radiated by contrast source `w`.
    pub fn radiate(&self, w: &[C]) -> Vec<C> {
        self.kernel
            .external
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(w).map(|(g, x)| g * x).sum())
            .collect()
    }

    /// `G_e^H y`.
    pub fn radiate_adjoint(&self, y: &[C]) -> Vec<C> {
        let ext = &self.kernel.external;
        let mut out = vec![C::new(0.0, 0.0); ext.ncols()];
        for (row, yr) in ext.rows().into_iter().zip(y) {
            for (o, g) in out.iter_mut().zip(row.iter()) {
                *o += g.conj() * yr;
            }
        }
        out
    }

    pub(crate) fn check_shapes(&self, chi: &ContrastMap, field: &FieldMap) -> Result<()> {
        let g = self.grid();
        for (what, grid, shape) in [
            ("contrast", chi.grid, chi.chi.dim()),
            ("field", field.grid, field.values.dim()),
        ] {
            if grid != g || shape != g.shape() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{:?} on a {} m domain", g.shape(), g.side_length),
                    found: format!("{what} {:?} on a {} m domain", shape, grid.side_length),
                });
            }
        }
        Ok(())
    }

    /// Antennas must lie outside every cell that carries contrast.
    pub fn check_antennas(&self, chi: &ContrastMap) -> Result<()> {
        let a = self.grid().equivalent_radius();
        let grid = self.grid();
        for (i, p) in self.config.array.positions().iter().enumerate() {
            for ((r, c), z) in chi.chi.indexed_iter() {
                if z.norm() == 0.0 {
                    continue;
                }
                let q = grid.cell_center(r, c);
                if (p[0] - q[0]).hypot(p[1] - q[1]) <= a {
                    return Err(Error::invalid(format!(
                        "antenna {i} lies inside scattering cell ({r}, {c})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Solve `T E = e_i` for flattened fields.
    pub fn solve_flat(&self, chi: &[C], e_i: &[C], tol: f64) -> Result<(Vec<C>, SolveStats)> {
        check_tol(tol)?;
        let mut x = e_i.to_vec();
        if chi.iter().all(|z| z.norm_sqr() == 0.0) {
            return Ok((
                x,
                SolveStats {
                    iterations: 0,
                    relative_residual: 0.0,
                    history: vec![0.0],
                },
            ));
        }
        let op = self.total_field_operator(chi);
        let s = &self.config.solver;
        let stats = krylov::solve(&op, e_i, &mut x, tol, s.max_iter, s.method)?;
        Ok((x, stats))
    }

    /// Solve the adjoint or forward system `A x = b` for either operator family.
    pub fn solve_with(
        &self,
        op: &dyn LinearMap,
        b: &[C],
        tol: f64,
        method: KrylovMethod,
    ) -> Result<(Vec<C>, SolveStats)> {
        let mut x = b.to_vec();
        let stats = krylov::solve(op, b, &mut x, tol, self.config.solver.max_iter, method)?;
        Ok((x, stats))
    }

    /// Total field for one view: `||E_t - E_i - G(chi E_t)|| <= tol ||E_i||`.
    pub fn solve_total_field(&self, chi: &ContrastMap, incident: &FieldMap, tol: f64) -> Result<(FieldMap, SolveStats)> {
        self.check_shapes(chi, incident)?;
        let chi_flat = chi.chi.as_slice().expect("standard layout");
        let (x, stats) = self.solve_flat(chi_flat, incident.flat(), tol)?;
        Ok((
            FieldMap {
                grid: incident.grid,
                values: Array2::from_shape_vec(incident.values.dim(), x).expect("shape"),
                view_index: incident.view_index,
            },
            stats,
        ))
    }

    /// `E_s[r] = sum_c external[r, c] chi_c E_t[c]`.
    pub fn scattered_field(&self, chi: &ContrastMap, total: &FieldMap) -> Result<Vec<C>> {
        self.check_shapes(chi, total)?;
        let w: Vec<C> = chi.chi.iter().zip(total.values.iter()).map(|(a, b)| a * b).collect();
        Ok(self.radiate(&w))
    }

    /// Total fields for every view (parallel over views).
    pub fn total_fields(&self, chi: &[C], tol: f64) -> Result<Vec<Vec<C>>> {
        (0..self.n_views())
            .into_par_iter()
            .map(|v| {
                self.solve_flat(chi, self.incident[v].flat(), tol)
                    .map(|(x, _)| x)
                    .map_err(|e| Error::View {
                        view: v,
                        source: Box::new(e),
                    })
            })
            .collect()
    }

    /// Synthesize a scattering matrix from flattened total fields.
    pub fn matrix_from_fields(&self, chi: &[C], fields: &[Vec<C>]) -> ScatteringMatrix {
        let nv = fields.len();
        let nr = self.n_receivers();
        let mut values = Array2::zeros((nv, nr));
        for (v, e) in fields.iter().enumerate() {
            let w: Vec<C> = chi.iter().zip(e).map(|(a, b)| a * b).collect();
            for (r, s) in self.radiate(&w).into_iter().enumerate() {
                values[[v, r]] = s;
            }
        }
        ScatteringMatrix {
            values,
            frequency: self.config.frequency,
            fingerprint: self.config.fingerprint(),
        }
    }

    /// Noise-free scattering matrix for contrast `chi` at the configured tolerance.
    pub fn scattering_matrix(&self, chi: &ContrastMap) -> Result<ScatteringMatrix> {
        self.scattering_matrix_tol(chi, self.config.solver.tol)
    }

    pub fn scattering_matrix_tol(&self, chi: &ContrastMap, tol: f64) -> Result<ScatteringMatrix> {
        if chi.grid != self.grid() || chi.chi.dim() != self.grid().shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.grid().shape()),
                found: format!("{:?}", chi.chi.dim()),
            });
        }
        self.check_antennas(chi)?;
        let flat = chi.chi.as_slice().expect("standard layout");
        let fields = self.total_fields(flat, tol)?;
        Ok(self.matrix_from_fields(flat, &fields))
    }

    /// Scattering matrix of a phantom.
    pub fn phantom_matrix(&self, phantom: &Phantom) -> Result<ScatteringMatrix> {
        let chi = contrast_of(&phantom.dielectrics, &self.config.background, self.config.frequency)?;
        self.scattering_matrix(&chi)
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= 1e-2 {
        Ok(())
    } else {
        Err(Error::invalid(format!("tolerance must lie in (0, 1e-2], got {tol}")))
    }
}

/// One-shot convenience: build the model and compute the phantom's matrix.
pub fn scattering_matrix(phantom: &Phantom, config: &ExperimentConfig) -> Result<ScatteringMatrix> {
    if phantom.grid() != config.grid {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", config.grid.shape()),
            found: format!("{:?}", phantom.grid().shape()),
        });
    }
    ForwardModel::new(config)?.phantom_matrix(phantom)
}
