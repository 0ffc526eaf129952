use ndarray::Array2;
use rand::Rng as _;

use super::geometry::BreastGeometry;
use super::{BreastClass, Tissue};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::Rng;

/// Quantile rounding keeps achieved fractions within half a cell of the
/// targets; below this many inner cells that could exceed 1.5 points.
const MIN_INNER_CELLS: usize = 34;

/// Per-pixel tissue codes (see [`Tissue`]).
#[derive(Debug, Clone, PartialEq)]
pub struct TissueLabelMap {
    pub grid: Grid,
    pub labels: Array2<u8>,
}

impl TissueLabelMap {
    pub fn empty(grid: Grid) -> Self {
        TissueLabelMap {
            grid,
            labels: Array2::zeros(grid.shape()),
        }
    }

    pub fn count(&self, t: Tissue) -> usize {
        self.labels.iter().filter(|&&l| l == t.code()).count()
    }

    pub fn support(&self) -> Array2<bool> {
        self.labels.mapv(|l| l != Tissue::Background.code())
    }

    /// Percent of inner cells per tissue (adipose, transitional, fibro).
    pub fn inner_percentages(&self) -> [f64; 3] {
        let counts = Tissue::INNER.map(|t| self.count(t) as f64);
        let total: f64 = counts.iter().sum();
        if total == 0.0 {
            return [0.0; 3];
        }
        counts.map(|c| 100.0 * c / total)
    }
}

/// Target percentages (adipose, transitional, fibro): uniform inside the
/// class ranges shrunk by `margin`, rescaled to sum to 100, redrawn until the
/// rescaled values stay inside the shrunk ranges.
pub fn draw_target_percentages(class: BreastClass, margin: f64, rng: &mut Rng) -> Result<[f64; 3]> {
    let ranges = class.ranges().map(|(lo, hi)| (lo + margin, hi - margin));
    if ranges.iter().any(|(lo, hi)| lo > hi) {
        return Err(Error::invalid(format!("percentage margin {margin} empties a class range")));
    }
    for _ in 0..10_000 {
        let draw = ranges.map(|(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo });
        let sum: f64 = draw.iter().sum();
        let scaled = draw.map(|p| 100.0 * p / sum);
        if scaled
            .iter()
            .zip(ranges.iter())
            .all(|(&p, &(lo, hi))| p >= lo && p <= hi)
        {
            return Ok(scaled);
        }
    }
    Err(Error::Generation {
        stage: "segment",
        message: format!("no admissible percentages for class {class}"),
    })
}

/// Rasterise the skin band and split the inner cells by field quantiles.
///
/// A cell is in the breast when its center is inside the outer ellipse. It is
/// skin when it is outside the inner ellipse or 4-adjacent to a non-breast
/// cell, which keeps the band closed even when it is thinner than a cell.
/// Inner cells are ranked by field value: lowest adipose, then transitional,
/// highest fibro-glandular.
pub fn segment_tissues(
    field: &Array2<f64>,
    geometry: &BreastGeometry,
    grid: &Grid,
    class: BreastClass,
    margin: f64,
    rng: &mut Rng,
) -> Result<TissueLabelMap> {
    let n = grid.n;
    if field.dim() != grid.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", grid.shape()),
            found: format!("{:?}", field.dim()),
        });
    }
    if !geometry.fits(grid) {
        return Err(Error::invalid(format!(
            "ellipse with semi-axes {:?} m at {:?} m does not fit a {} m domain",
            geometry.semi_axes, geometry.center, grid.side_length
        )));
    }
    let support = Array2::from_shape_fn((n, n), |(r, c)| geometry.contains(grid.cell_center(r, c), grid.origin));
    let mut labels = Array2::<u8>::zeros((n, n));
    let mut inner = Vec::new();
    for r in 0..n {
        for c in 0..n {
            if !support[[r, c]] {
                continue;
            }
            let edge = r == 0 || c == 0 || r + 1 == n || c + 1 == n;
            let touches_bg = edge
                || !support[[r - 1, c]]
                || !support[[r + 1, c]]
                || !support[[r, c - 1]]
                || !support[[r, c + 1]];
            if touches_bg || !geometry.inner_contains(grid.cell_center(r, c), grid.origin) {
                labels[[r, c]] = Tissue::Skin.code();
            } else {
                inner.push((r, c));
            }
        }
    }
    let reject = |message: String| Error::Generation {
        stage: "segment",
        message,
    };
    if inner.len() < MIN_INNER_CELLS {
        return Err(reject(format!(
            "only {} inner cells, need {MIN_INNER_CELLS}",
            inner.len()
        )));
    }
    let (lo, hi) = inner.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
        (lo.min(field[p]), hi.max(field[p]))
    });
    if !(hi > lo) {
        return Err(reject("field is constant over the breast; quantiles undefined".into()));
    }

    let targets = draw_target_percentages(class, margin, rng)?;
    let counts = apportion(inner.len(), &targets);
    inner.sort_by(|&a, &b| field[a].total_cmp(&field[b]).then(a.cmp(&b)));
    let mut it = inner.into_iter();
    for (tissue, count) in Tissue::INNER.iter().zip(counts) {
        for p in it.by_ref().take(count) {
            labels[p] = tissue.code();
        }
    }
    let map = TissueLabelMap {
        grid: *grid,
        labels,
    };
    if !class.admits(map.inner_percentages()) {
        return Err(reject(format!(
            "achieved {:?} outside class {class} ranges",
            map.inner_percentages()
        )));
    }
    Ok(map)
}

/// Largest-remainder split of `total` items by percentages summing to 100.
fn apportion(total: usize, percentages: &[f64; 3]) -> [usize; 3] {
    let exact = percentages.map(|p| p * total as f64 / 100.0);
    let mut counts = exact.map(|e| e.floor() as usize);
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}
