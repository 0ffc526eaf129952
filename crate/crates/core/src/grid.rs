//! Imaging-domain discretization and antenna layout.
//!
//! Rasters are stored row-major. Index `(row, col)` maps to `(y, x)`: row 0 is
//! the bottom of the domain and `y` grows with the row index, `x` grows with the
//! column index.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Square imaging domain split into `n x n` square cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Edge length of the square domain (m).
    pub side_length: f64,
    /// Cells per side.
    pub n: usize,
    /// Domain center (m).
    #[serde(default)]
    pub origin: [f64; 2],
}

impl Grid {
    pub const MIN_CELLS: usize = 8;

    pub fn new(side_length: f64, n: usize) -> Result<Self> {
        let grid = Grid {
            side_length,
            n,
            origin: [0.0, 0.0],
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < Self::MIN_CELLS {
            return Err(Error::invalid(format!(
                "grid must have at least {} cells per side, got {}",
                Self::MIN_CELLS,
                self.n
            )));
        }
        if !(self.side_length.is_finite() && self.side_length > 0.0) {
            return Err(Error::invalid(format!(
                "grid side length must be positive, got {}",
                self.side_length
            )));
        }
        if !(self.origin[0].is_finite() && self.origin[1].is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn cell_size(&self) -> f64 {
        self.side_length / self.n as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        let d = self.cell_size();
        d * d
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.n)
    }

    /// Center coordinate along one axis for cell index `i`.
    #[inline]
    fn axis_center(&self, i: usize, origin: f64) -> f64 {
        origin + (i as f64 + 0.5 - 0.5 * self.n as f64) * self.cell_size()
    }

    /// `(x, y)` of the center of cell `(row, col)`.
    #[inline]
    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.axis_center(col, self.origin[0]),
            self.axis_center(row, self.origin[1]),
        ]
    }

    /// Cell centers in row-major order.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.len());
        for row in 0..self.n {
            for col in 0..self.n {
                out.push(self.cell_center(row, col));
            }
        }
        out
    }

    /// Radius of the disc with the same area as one cell.
    pub fn equivalent_radius(&self) -> f64 {
        self.cell_size() / PI.sqrt()
    }

    /// Half of the domain diagonal.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.side_length * 2f64.sqrt()
    }

    /// Cell `(row, col)` containing point `p`, if any.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let d = self.cell_size();
        let fx = (p[0] - self.origin[0]) / d + 0.5 * self.n as f64;
        let fy = (p[1] - self.origin[1]) / d + 0.5 * self.n as f64;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (col, row) = (fx.floor() as usize, fy.floor() as usize);
        (col < self.n && row < self.n).then_some((row, col))
    }
}

/// Colocated transmit/receive antennas equally spaced on a circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaArray {
    /// Measurement circle radius (m).
    pub radius: f64,
    pub count: usize,
    /// Angular offset of antenna 0 (rad).
    #[serde(default)]
    pub start_angle: f64,
}

impl AntennaArray {
    pub fn new(radius: f64, count: usize) -> Result<Self> {
        let array = AntennaArray {
            radius,
            count,
            start_angle: 0.0,
        };
        array.validate()?;
        Ok(array)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("antenna count must be positive"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::invalid(format!(
                "antenna radius must be positive, got {}",
                self.radius
            )));
        }
        if !(0.0..2.0 * PI).contains(&self.start_angle) {
            return Err(Error::invalid("antenna start angle must lie in [0, 2pi)"));
        }
        Ok(())
    }

    /// Angular step between neighbouring antennas.
    pub fn step(&self) -> f64 {
        2.0 * PI / self.count as f64
    }

    /// Strictly increasing angles in `[0, 2pi)`.
    pub fn angles(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.start_angle + i as f64 * self.step())
            .collect()
    }

    pub fn position(&self, index: usize) -> [f64; 2] {
        let a = self.start_angle + index as f64 * self.step();
        [self.radius * a.cos(), self.radius * a.sin()]
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        (0..self.count).map(|i| self.position(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_are_symmetric_about_origin() {
        let g = Grid::new(0.15, 10).unwrap();
        let c = g.centers();
        let sx: f64 = c.iter().map(|p| p[0]).sum();
        let sy: f64 = c.iter().map(|p| p[1]).sum();
        assert!(sx.abs() < 1e-12 && sy.abs() < 1e-12);
        assert!((g.cell_center(0, 0)[0] + g.cell_center(9, 9)[0]).abs() < 1e-15);
        // row grows with y
        assert!(g.cell_center(1, 0)[1] > g.cell_center(0, 0)[1]);
    }

    #[test]
    fn rejects_small_grid() {
        assert!(Grid::new(0.15, 7).is_err());
        assert!(Grid::new(0.0, 16).is_err());
    }

    #[test]
    fn locate_inverts_center() {
        let g = Grid::new(0.15, 16).unwrap();
        for (r, c) in [(0, 0), (3, 11), (15, 15)] {
            assert_eq!(g.locate(g.cell_center(r, c)), Some((r, c)));
        }
        assert_eq!(g.locate([1.0, 0.0]), None);
    }

    #[test]
    fn angles_increasing_and_in_range() {
        let a = AntennaArray::new(0.12, 30).unwrap();
        let ang = a.angles();
        assert_eq!(ang.len(), 30);
        assert!(ang.windows(2).all(|w| w[1] > w[0]));
        assert!(ang.iter().all(|&t| (0.0..2.0 * PI).contains(&t)));
        let p = a.position(0);
        assert!((p[0] - 0.12).abs() < 1e-15 && p[1].abs() < 1e-15);
    }
}
