use rand::Rng as _;
use std::f64::consts::PI;

use crate::grid::Grid;
use crate::rng::Rng;

/// Full ellipse axis range (m).
pub const AXIS_RANGE: (f64, f64) = (0.065, 0.12);
/// Radius of the disc holding the ellipse center (m).
pub const CENTER_RADIUS: f64 = 0.01;
/// Skin thickness range (m).
pub const SKIN_RANGE: (f64, f64) = (0.0015, 0.0025);

/// Outer breast contour and skin layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreastGeometry {
    /// Semi-axes `(a, b)` (m).
    pub semi_axes: (f64, f64),
    /// Offset from the domain center (m).
    pub center: (f64, f64),
    pub orientation: f64,
    pub skin_thickness: f64,
}

impl BreastGeometry {
    /// Normalised radius `(u^2 + v^2)` of `p` in the ellipse frame shrunk by `inset`.
    fn rho2(&self, p: [f64; 2], origin: [f64; 2], inset: f64) -> f64 {
        let (a, b) = (self.semi_axes.0 - inset, self.semi_axes.1 - inset);
        if a <= 0.0 || b <= 0.0 {
            return f64::INFINITY;
        }
        let dx = p[0] - origin[0] - self.center.0;
        let dy = p[1] - origin[1] - self.center.1;
        let (s, c) = self.orientation.sin_cos();
        let u = (dx * c + dy * s) / a;
        let v = (-dx * s + dy * c) / b;
        u * u + v * v
    }

    /// Inside the outer contour.
    pub fn contains(&self, p: [f64; 2], origin: [f64; 2]) -> bool {
        self.rho2(p, origin, 0.0) <= 1.0
    }

    /// Inside the inner (skin-stripped) contour.
    pub fn inner_contains(&self, p: [f64; 2], origin: [f64; 2]) -> bool {
        self.rho2(p, origin, self.skin_thickness) <= 1.0
    }

    /// Half-extents of the axis-aligned bounding box.
    pub fn half_extent(&self) -> (f64, f64) {
        let (a, b) = self.semi_axes;
        let (s, c) = self.orientation.sin_cos();
        (
            (a * a * c * c + b * b * s * s).sqrt(),
            (a * a * s * s + b * b * c * c).sqrt(),
        )
    }

    /// Whether the whole ellipse lies inside the grid.
    pub fn fits(&self, grid: &Grid) -> bool {
        let (hx, hy) = self.half_extent();
        let half = 0.5 * grid.side_length;
        self.center.0.abs() + hx < half && self.center.1.abs() + hy < half
    }

    /// Largest distance from the domain center to a point of the ellipse.
    pub fn max_radius(&self) -> f64 {
        self.semi_axes.0.max(self.semi_axes.1) + self.center.0.hypot(self.center.1)
    }
}

/// Uniform draws over the declared geometry ranges; the center is uniform
/// over the 1 cm disc.
pub fn sample_geometry(rng: &mut Rng) -> BreastGeometry {
    let a = 0.5 * rng.random_range(AXIS_RANGE.0..=AXIS_RANGE.1);
    let b = 0.5 * rng.random_range(AXIS_RANGE.0..=AXIS_RANGE.1);
    let r = CENTER_RADIUS * rng.random::<f64>().sqrt();
    let phi = rng.random_range(0.0..2.0 * PI);
    let orientation = rng.random_range(0.0..2.0 * PI);
    let skin_thickness = rng.random_range(SKIN_RANGE.0..=SKIN_RANGE.1);
    BreastGeometry {
        semi_axes: (a, b),
        center: (r * phi.cos(), r * phi.sin()),
        orientation,
        skin_thickness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn same_seed_same_geometry() {
        let g1 = sample_geometry(&mut rng::stream(3, &[]));
        let g2 = sample_geometry(&mut rng::stream(3, &[]));
        assert_eq!(g1, g2);
    }

    #[test]
    fn containment_respects_axes() {
        let g = BreastGeometry {
            semi_axes: (0.05, 0.03),
            center: (0.0, 0.0),
            orientation: 0.0,
            skin_thickness: 0.002,
        };
        let o = [0.0, 0.0];
        assert!(g.contains([0.049, 0.0], o));
        assert!(!g.contains([0.0, 0.031], o));
        assert!(!g.inner_contains([0.049, 0.0], o));
        assert!(g.inner_contains([0.047, 0.0], o));
        assert_eq!(g.half_extent(), (0.05, 0.03));
    }
}
