use ndarray::Array2;

use crate::error::{Error, Result};
use crate::forward::ScatteringMatrix;
use crate::grid::Grid;
use crate::medium::DielectricMap;

const MIN_STD: f64 = 1e-12;

/// Per-feature z-score statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InputNorm {
    pub fn identity(dim: usize) -> Self {
        InputNorm {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population mean and std over `samples`; zero-variance features get
    /// `std = 1e-12` and a warning.
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut count = 0usize;
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        for s in samples {
            if count == 0 {
                mean = vec![0.0; s.len()];
                m2 = vec![0.0; s.len()];
            } else if s.len() != mean.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} features", mean.len()),
                    found: format!("{}", s.len()),
                });
            }
            count += 1;
            // Welford
            for ((m, q), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(s) {
                let d = x - *m;
                *m += d / count as f64;
                *q += d * (x - *m);
            }
        }
        if count == 0 {
            return Err(Error::invalid("cannot fit input statistics on zero samples"));
        }
        let mut flat = 0;
        let std = m2
            .iter()
            .map(|q| {
                let s = (q / count as f64).sqrt();
                if s < MIN_STD {
                    flat += 1;
                    MIN_STD
                } else {
                    s
                }
            })
            .collect();
        if flat > 0 {
            log::warn!("{flat} input features have zero variance; std clamped to {MIN_STD:e}");
        }
        Ok(InputNorm { mean, std })
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| x * s + m)
            .collect()
    }
}

/// Row-major `(re, im)` interleaving, length `2 Nv Nr`.
pub fn raw_features(s: &ScatteringMatrix) -> Vec<f64> {
    s.values.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Flatten and z-score a scattering matrix.
pub fn encode_input(s: &ScatteringMatrix, norm: &InputNorm) -> Result<Vec<f64>> {
    let raw = raw_features(s);
    if raw.len() != norm.mean.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} features ({} complex entries)", norm.mean.len(), norm.mean.len() / 2),
            found: format!("{} features from a {:?} matrix", raw.len(), s.values.dim()),
        });
    }
    Ok(norm.apply(&raw))
}

/// Global min-max bounds per channel (eps_r, sigma).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetScaling {
    pub eps_min: f64,
    pub eps_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl TargetScaling {
    pub fn identity() -> Self {
        TargetScaling {
            eps_min: 0.0,
            eps_max: 1.0,
            sigma_min: 0.0,
            sigma_max: 1.0,
        }
    }

    pub fn fit<'a>(maps: impl IntoIterator<Item = &'a DielectricMap>) -> Result<Self> {
        let mut t = TargetScaling {
            eps_min: f64::INFINITY,
            eps_max: f64::NEG_INFINITY,
            sigma_min: f64::INFINITY,
            sigma_max: f64::NEG_INFINITY,
        };
        for m in maps {
            for &e in &m.eps_r {
                t.eps_min = t.eps_min.min(e);
                t.eps_max = t.eps_max.max(e);
            }
            for &s in &m.sigma {
                t.sigma_min = t.sigma_min.min(s);
                t.sigma_max = t.sigma_max.max(s);
            }
        }
        if !t.eps_min.is_finite() {
            return Err(Error::invalid("cannot fit target scaling on zero maps"));
        }
        Ok(t)
    }

    fn span(lo: f64, hi: f64) -> f64 {
        if hi > lo {
            hi - lo
        } else {
            1.0
        }
    }

    pub(crate) fn to_array(self) -> [f64; 4] {
        [self.eps_min, self.eps_max, self.sigma_min, self.sigma_max]
    }

    pub(crate) fn from_array(a: [f64; 4]) -> Self {
        TargetScaling {
            eps_min: a[0],
            eps_max: a[1],
            sigma_min: a[2],
            sigma_max: a[3],
        }
    }
}

/// `eps_r` raster then `sigma` raster, row-major, each mapped to `[0, 1]`.
pub fn encode_target(map: &DielectricMap, scaling: &TargetScaling) -> Vec<f64> {
    let se = TargetScaling::span(scaling.eps_min, scaling.eps_max);
    let ss = TargetScaling::span(scaling.sigma_min, scaling.sigma_max);
    map.eps_r
        .iter()
        .map(|e| (e - scaling.eps_min) / se)
        .chain(map.sigma.iter().map(|s| (s - scaling.sigma_min) / ss))
        .collect()
}

/// Inverse of [`encode_target`]. Outputs outside `[0, 1]` are clamped; the
/// second value counts them.
pub fn decode_target(y: &[f64], scaling: &TargetScaling, grid: &Grid) -> Result<(DielectricMap, usize)> {
    let cells = grid.len();
    if y.len() != 2 * cells {
        return Err(Error::ShapeMismatch {
            expected: format!("{} outputs for a {}x{} grid", 2 * cells, grid.n, grid.n),
            found: format!("{}", y.len()),
        });
    }
    let se = TargetScaling::span(scaling.eps_min, scaling.eps_max);
    let ss = TargetScaling::span(scaling.sigma_min, scaling.sigma_max);
    let mut clamped = 0;
    let mut unit = |v: f64| {
        if !(0.0..=1.0).contains(&v) {
            clamped += 1;
            if v.is_nan() {
                0.0
            } else {
                v.clamp(0.0, 1.0)
            }
        } else {
            v
        }
    };
    let eps: Vec<f64> = y[..cells].iter().map(|&v| scaling.eps_min + se * unit(v)).collect();
    let sig: Vec<f64> = y[cells..].iter().map(|&v| scaling.sigma_min + ss * unit(v)).collect();
    let map = DielectricMap {
        grid: *grid,
        eps_r: Array2::from_shape_vec(grid.shape(), eps).expect("cells").mapv(|e| e.max(1.0)),
        sigma: Array2::from_shape_vec(grid.shape(), sig).expect("cells").mapv(|s| s.max(0.0)),
    };
    Ok((map, clamped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn features_interleave_row_major() {
        let s = ScatteringMatrix {
            values: Array2::from_shape_fn((2, 2), |(i, j)| Complex64::new((i * 2 + j) as f64, -((i * 2 + j) as f64))),
            frequency: 1e9,
            fingerprint: [0; 32],
        };
        assert_eq!(raw_features(&s), vec![0.0, -0.0, 1.0, -1.0, 2.0, -2.0, 3.0, -3.0]);
    }

    #[test]
    fn target_round_trip() {
        let g = Grid::new(0.15, 8).unwrap();
        let m = DielectricMap {
            grid: g,
            eps_r: Array2::from_shape_fn((8, 8), |(r, c)| 2.0 + (r * 8 + c) as f64 * 0.7),
            sigma: Array2::from_shape_fn((8, 8), |(r, c)| (r + c) as f64 * 0.05),
        };
        let sc = TargetScaling::fit([&m]).unwrap();
        let y = encode_target(&m, &sc);
        assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
        let (back, clamped) = decode_target(&y, &sc, &g).unwrap();
        assert_eq!(clamped, 0);
        for (a, b) in back.eps_r.iter().zip(m.eps_r.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn decode_clamps_and_counts() {
        let g = Grid::new(0.15, 8).unwrap();
        let sc = TargetScaling {
            eps_min: 2.0,
            eps_max: 50.0,
            sigma_min: 0.0,
            sigma_max: 2.0,
        };
        let mut y = vec![0.5; 128];
        y[0] = -1.0;
        y[100] = 3.0;
        let (m, clamped) = decode_target(&y, &sc, &g).unwrap();
        assert_eq!(clamped, 2);
        assert_eq!(m.eps_r[[0, 0]], 2.0);
        assert_eq!(m.sigma[[4, 4]], 2.0);
    }
}
