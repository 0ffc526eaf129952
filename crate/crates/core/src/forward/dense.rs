use ndarray::Array2;
use num_complex::Complex64;

use super::{FieldMap, ForwardModel};
use crate::error::{Error, Result};
use crate::medium::ContrastMap;

/// Largest grid the dense oracle accepts (the factorization is O(n^6)).
pub const MAX_DENSE_N: usize = 32;

/// LU factorization with partial pivoting, in place.
fn lu_solve(mut a: Array2<Complex64>, mut b: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = b.len();
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, a[[i, k]].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax == 0.0 || !pmax.is_finite() {
            return Err(Error::Numerical(format!("singular MoM matrix at column {k}")));
        }
        if piv != k {
            for j in 0..n {
                a.swap([k, j], [piv, j]);
            }
            b.swap(k, piv);
        }
        let inv = a[[k, k]].inv();
        for i in k + 1..n {
            let f = a[[i, k]] * inv;
            if f.norm_sqr() == 0.0 {
                continue;
            }
            a[[i, k]] = f;
            let (top, mut bottom) = a.view_mut().split_at(ndarray::Axis(0), i);
            let pivot_row = top.row(k);
            let mut row = bottom.row_mut(0);
            for j in k + 1..n {
                row[j] -= f * pivot_row[j];
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= a[[k, j]] * b[j];
        }
        b[k] = acc / a[[k, k]];
    }
    Ok(b)
}

/// Assemble `I - G diag(chi)` explicitly and solve it directly.
pub fn dense_mom_solve(model: &ForwardModel, chi: &ContrastMap, incident: &FieldMap) -> Result<FieldMap> {
    let grid = model.grid();
    if grid.n > MAX_DENSE_N {
        return Err(Error::invalid(format!(
            "dense solve limited to n <= {MAX_DENSE_N}, got {}",
            grid.n
        )));
    }
    model.check_shapes(chi, incident)?;
    let n = grid.n;
    let cells = n * n;
    let k = &model.kernel.internal;
    let chi_flat: Vec<Complex64> = chi.chi.iter().copied().collect();
    let mut a = Array2::<Complex64>::zeros((cells, cells));
    for p in 0..cells {
        let (pr, pc) = (p / n, p % n);
        for q in 0..cells {
            let (qr, qc) = (q / n, q % n);
            let g = k[[pr + n - 1 - qr, pc + n - 1 - qc]];
            a[[p, q]] = -g * chi_flat[q];
        }
        a[[p, p]] += 1.0;
    }
    let b: Vec<Complex64> = incident.values.iter().copied().collect();
    let x = lu_solve(a, b)?;
    Ok(FieldMap {
        grid,
        values: Array2::from_shape_vec((n, n), x).expect("square"),
        view_index: incident.view_index,
    })
}
