use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::segment::TissueLabelMap;
use super::Tissue;
use crate::error::{Error, Result};
use crate::medium::{BackgroundMedium, DielectricMap};
use crate::rng::Rng;

/// Normal distribution truncated to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalSpec {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl NormalSpec {
    pub const fn new(mean: f64, std: f64, min: f64, max: f64) -> Self {
        NormalSpec { mean, std, min, max }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = self.std > 0.0
            && self.min <= self.mean
            && self.mean <= self.max
            && [self.mean, self.std, self.min, self.max].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad distribution for {what}: {self:?}")))
        }
    }

    /// Rejection sampling; the bounds used here are several std wide so
    /// acceptance is high.
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        for _ in 0..1000 {
            let z: f64 = rng.sample(StandardNormal);
            let v = self.mean + self.std * z;
            if v >= self.min && v <= self.max {
                return v;
            }
        }
        self.mean
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TissueStats {
    pub eps_r: NormalSpec,
    /// S/m.
    pub sigma: NormalSpec,
}

/// Per-tissue dielectric distributions at the operating frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TissueDielectricStats {
    pub skin: TissueStats,
    pub adipose: TissueStats,
    pub transitional: TissueStats,
    pub fibroglandular: TissueStats,
}

impl Default for TissueDielectricStats {
    /// Values at 1 GHz.
    fn default() -> Self {
        TissueDielectricStats {
            adipose: TissueStats {
                eps_r: NormalSpec::new(5.0, 1.0, 2.5, 10.0),
                sigma: NormalSpec::new(0.10, 0.05, 0.01, 0.4),
            },
            transitional: TissueStats {
                eps_r: NormalSpec::new(20.0, 4.0, 10.0, 32.0),
                sigma: NormalSpec::new(0.45, 0.15, 0.1, 1.0),
            },
            fibroglandular: TissueStats {
                eps_r: NormalSpec::new(40.0, 6.0, 28.0, 60.0),
                sigma: NormalSpec::new(1.0, 0.3, 0.4, 2.5),
            },
            skin: TissueStats {
                eps_r: NormalSpec::new(38.0, 3.0, 30.0, 46.0),
                sigma: NormalSpec::new(1.1, 0.2, 0.6, 1.8),
            },
        }
    }
}

impl TissueDielectricStats {
    pub fn get(&self, t: Tissue) -> Option<&TissueStats> {
        match t {
            Tissue::Background => None,
            Tissue::Skin => Some(&self.skin),
            Tissue::Adipose => Some(&self.adipose),
            Tissue::Transitional => Some(&self.transitional),
            Tissue::Fibroglandular => Some(&self.fibroglandular),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("skin", &self.skin),
            ("adipose", &self.adipose),
            ("transitional", &self.transitional),
            ("fibroglandular", &self.fibroglandular),
        ] {
            s.eps_r.validate(&format!("{name} eps_r"))?;
            s.sigma.validate(&format!("{name} sigma"))?;
            if s.eps_r.min < 1.0 || s.sigma.min < 0.0 {
                return Err(Error::invalid(format!(
                    "{name} bounds allow unphysical values (eps_r >= 1, sigma >= 0)"
                )));
            }
        }
        Ok(())
    }
}

/// Per phantom and tissue: one truncated-normal base value, then additive
/// per-pixel normal jitter with std `jitter * base`, clamped to the bounds.
/// Background cells get the background values exactly.
pub fn assign_dielectrics(
    labels: &TissueLabelMap,
    stats: &TissueDielectricStats,
    bg: &BackgroundMedium,
    jitter: f64,
    rng: &mut Rng,
) -> Result<DielectricMap> {
    stats.validate()?;
    bg.validate()?;
    let grid = labels.grid;
    let order = [Tissue::Skin, Tissue::Adipose, Tissue::Transitional, Tissue::Fibroglandular];
    let mut base = [(0.0, 0.0); 5];
    for t in order {
        let s = stats.get(t).expect("tissue stats");
        base[t.code() as usize] = (s.eps_r.sample(rng), s.sigma.sample(rng));
    }
    let mut eps_r = Array2::from_elem(grid.shape(), bg.eps_r);
    let mut sigma = Array2::from_elem(grid.shape(), bg.sigma);
    for ((idx, &code), (e, s)) in labels
        .labels
        .indexed_iter()
        .zip(eps_r.iter_mut().zip(sigma.iter_mut()))
    {
        let tissue = Tissue::from_code(code).ok_or_else(|| Error::Corrupt {
            location: format!("label map at {idx:?}"),
            message: format!("unknown tissue code {code}"),
        })?;
        let Some(st) = stats.get(tissue) else { continue };
        let (be, bs) = base[code as usize];
        let ze: f64 = rng.sample(StandardNormal);
        let zs: f64 = rng.sample(StandardNormal);
        *e = st.eps_r.clamp(be + jitter * be * ze);
        *s = st.sigma.clamp(bs + jitter * bs * zs);
    }
    DielectricMap::new(grid, eps_r, sigma)
}

/// 1D Gaussian taps for std `s` pixels, truncated at 3 std.
fn gaussian_taps(s: f64) -> Vec<f64> {
    let half = (3.0 * s).ceil() as isize;
    (-half..=half)
        .map(|i| (-0.5 * (i as f64 / s).powi(2)).exp())
        .collect()
}

fn separable_blur(a: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
    let (rows, cols) = a.dim();
    let half = (taps.len() / 2) as isize;
    let mut tmp = Array2::<f64>::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (k, w) in taps.iter().enumerate() {
                let cc = c as isize + k as isize - half;
                if cc >= 0 && (cc as usize) < cols {
                    acc += w * a[[r, cc as usize]];
                }
            }
            tmp[[r, c]] = acc;
        }
    }
    let mut out = Array2::<f64>::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (k, w) in taps.iter().enumerate() {
                let rr = r as isize + k as isize - half;
                if rr >= 0 && (rr as usize) < rows {
                    acc += w * tmp[[rr as usize, c]];
                }
            }
            out[[r, c]] = acc;
        }
    }
    out
}

/// Gaussian blur restricted to the inner tissue (labels 2..=4), computed as a
/// normalised convolution so only inner cells contribute. Skin and background
/// are returned untouched; `kernel_std = 0` is the identity.
pub fn smooth_correlate(map: &DielectricMap, labels: &TissueLabelMap, kernel_std: f64) -> DielectricMap {
    if kernel_std <= 0.0 {
        return map.clone();
    }
    let inner = labels.labels.mapv(|l| Tissue::from_code(l).is_some_and(Tissue::is_inner));
    let mask = inner.mapv(|b| if b { 1.0 } else { 0.0 });
    let taps = gaussian_taps(kernel_std);
    let weight = separable_blur(&mask, &taps);
    let blur = |a: &Array2<f64>| {
        let num = separable_blur(&(a * &mask), &taps);
        let mut out = a.clone();
        for ((o, &m), (&n, &w)) in out
            .iter_mut()
            .zip(inner.iter())
            .zip(num.iter().zip(weight.iter()))
        {
            if m {
                *o = n / w;
            }
        }
        out
    };
    DielectricMap {
        grid: map.grid,
        eps_r: blur(&map.eps_r),
        sigma: blur(&map.sigma),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::rng;

    #[test]
    fn background_labels_give_background() {
        let g = Grid::new(0.15, 16).unwrap();
        let bg = BackgroundMedium::default();
        let m = assign_dielectrics(&TissueLabelMap::empty(g), &TissueDielectricStats::default(), &bg, 0.1, &mut rng::stream(1, &[])).unwrap();
        assert_eq!(m, DielectricMap::uniform(g, &bg));
    }

    #[test]
    fn truncation_is_respected() {
        let g = Grid::new(0.15, 100).unwrap();
        let mut labels = TissueLabelMap::empty(g);
        labels.labels.fill(Tissue::Adipose.code());
        let stats = TissueDielectricStats::default();
        let m = assign_dielectrics(&labels, &stats, &BackgroundMedium::default(), 0.5, &mut rng::stream(2, &[])).unwrap();
        assert!(m.eps_r.iter().all(|&v| v >= 2.5 && v <= 10.0));
        assert!(m.sigma.iter().all(|&v| v >= 0.01 && v <= 0.4));
    }

    #[test]
    fn zero_std_is_identity() {
        let g = Grid::new(0.15, 8).unwrap();
        let mut labels = TissueLabelMap::empty(g);
        labels.labels.fill(3);
        let m = DielectricMap {
            grid: g,
            eps_r: Array2::from_shape_fn((8, 8), |(r, c)| 1.0 + (r * c) as f64 * 0.37),
            sigma: Array2::from_shape_fn((8, 8), |(r, c)| (r + c) as f64 * 0.01),
        };
        let s = smooth_correlate(&m, &labels, 0.0);
        assert_eq!(s, m);
    }

    #[test]
    fn checkerboard_variance_drops_and_outside_is_untouched() {
        let g = Grid::new(0.15, 16).unwrap();
        let mut labels = TissueLabelMap::empty(g);
        for r in 4..12 {
            for c in 4..12 {
                labels.labels[[r, c]] = 2;
            }
        }
        let eps = Array2::from_shape_fn((16, 16), |(r, c)| {
            if (4..12).contains(&r) && (4..12).contains(&c) {
                if (r + c) % 2 == 0 { 10.0 } else { 20.0 }
            } else {
                23.0 + 1e-13 * (r * 16 + c) as f64
            }
        });
        let m = DielectricMap {
            grid: g,
            eps_r: eps.clone(),
            sigma: Array2::zeros((16, 16)),
        };
        let s = smooth_correlate(&m, &labels, 2.0);
        let var = |a: &Array2<f64>| {
            let v: Vec<f64> = a
                .indexed_iter()
                .filter(|(i, _)| labels.labels[*i] == 2)
                .map(|(_, &x)| x)
                .collect();
            let mu = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / v.len() as f64
        };
        assert!(var(&s.eps_r) < var(&eps));
        for ((i, &a), &b) in eps.indexed_iter().zip(s.eps_r.iter()) {
            if labels.labels[i] == 0 {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
