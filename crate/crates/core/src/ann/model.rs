use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;

use super::encode::{InputNorm, TargetScaling};
use super::{Activation, MlpArchitecture};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const MAGIC: &[u8; 4] = b"MWTM";
pub const FORMAT_VERSION: u32 = 1;

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

/// Network parameters plus the normalisation that maps data to and from it.
///
/// All weights and biases live in one flat vector; layer `l` stores its
/// `fan_out x fan_in` weight matrix row-major followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub arch: MlpArchitecture,
    pub params: Vec<f64>,
    pub input_norm: InputNorm,
    pub target_scaling: TargetScaling,
    /// Configuration fingerprint of the training data (all zero if unknown).
    pub data_fingerprint: [u8; 32],
    layers: Vec<Layer>,
}

fn layout(arch: &MlpArchitecture) -> Vec<Layer> {
    let mut off = 0;
    arch.widths()
        .windows(2)
        .map(|w| {
            let l = Layer {
                w: off,
                b: off + w[0] * w[1],
                fan_in: w[0],
                fan_out: w[1],
            };
            off = l.b + w[1];
            l
        })
        .collect()
}

/// Gradients in the same flat layout as the parameters, plus the batch loss.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradients {
    pub grad: Vec<f64>,
    pub loss: f64,
}

impl MlpModel {
    /// All-zero parameters with identity normalisation.
    pub fn zeros(arch: MlpArchitecture) -> Result<Self> {
        arch.validate()?;
        let layers = layout(&arch);
        Ok(MlpModel {
            params: vec![0.0; arch.n_params()],
            input_norm: InputNorm::identity(arch.input_dim),
            target_scaling: TargetScaling::identity(),
            data_fingerprint: [0; 32],
            arch,
            layers,
        })
    }

    /// Uniform fan-in initialisation: `U(-l, l)` with `l = sqrt(6 / fan_in)`
    /// for ReLU layers and `sqrt(3 / fan_in)` otherwise; biases zero.
    pub fn init(arch: MlpArchitecture, rng: &mut Rng) -> Result<Self> {
        let mut m = Self::zeros(arch)?;
        let gain = match m.arch.activation {
            Activation::Relu => 6.0,
            _ => 3.0,
        };
        let last = m.layers.len() - 1;
        for (i, l) in m.layers.clone().into_iter().enumerate() {
            // the linear output layer uses the unit-gain rule
            let g = if i == last { 3.0 } else { gain };
            let lim = (g / l.fan_in as f64).sqrt();
            for p in &mut m.params[l.w..l.b] {
                *p = rng.random_range(-lim..lim);
            }
        }
        Ok(m)
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let l = self.layers[layer];
        ArrayView2::from_shape((l.fan_out, l.fan_in), &self.params[l.w..l.b]).expect("layout")
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let l = self.layers[layer];
        ArrayView1::from(&self.params[l.b..l.b + l.fan_out])
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layers[layer];
        &mut self.params[l.w..l.b]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layers[layer];
        &mut self.params[l.b..l.b + l.fan_out]
    }

    /// Pre-activations of every layer for a batch (rows are samples).
    fn forward_cache(&self, x: &ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut zs = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for i in 0..self.layers.len() {
            let mut z = a.dot(&self.weights(i).t());
            z += &self.bias(i);
            if i < last {
                a = z.mapv(|v| self.arch.activation.apply(v));
            }
            zs.push(z);
        }
        zs
    }

    /// Batched forward pass.
    pub fn forward_batch(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.arch.input_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{} inputs", self.arch.input_dim),
                found: format!("{}", x.ncols()),
            });
        }
        Ok(self.forward_cache(x).pop().expect("at least one layer"))
    }

    /// Mean over the batch of `||y - t||^2 / output_dim`, and its gradient.
    pub fn backward_batch(&self, x: &ArrayView2<f64>, t: &ArrayView2<f64>) -> Result<BatchGradients> {
        if x.ncols() != self.arch.input_dim || t.ncols() != self.arch.output_dim || x.nrows() != t.nrows() {
            return Err(Error::ShapeMismatch {
                expected: format!("batch x {} inputs, batch x {} targets", self.arch.input_dim, self.arch.output_dim),
                found: format!("{:?} inputs, {:?} targets", x.dim(), t.dim()),
            });
        }
        let batch = x.nrows() as f64;
        let zs = self.forward_cache(x);
        let act = self.arch.activation;
        let y = zs.last().expect("layer");
        let diff = y - t;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / (self.arch.output_dim as f64 * batch);
        let mut delta = diff * (2.0 / (self.arch.output_dim as f64 * batch));
        let mut grad = vec![0.0; self.params.len()];
        for i in (0..self.layers.len()).rev() {
            let l = self.layers[i];
            let input = if i == 0 {
                x.to_owned()
            } else {
                zs[i - 1].mapv(|v| act.apply(v))
            };
            let gw = delta.t().dot(&input);
            grad[l.w..l.b].copy_from_slice(gw.as_slice().expect("standard layout"));
            let gb = delta.sum_axis(Axis(0));
            grad[l.b..l.b + l.fan_out].copy_from_slice(gb.as_slice().expect("contiguous"));
            if i > 0 {
                let mut back = delta.dot(&self.weights(i));
                ndarray::Zip::from(&mut back)
                    .and(&zs[i - 1])
                    .for_each(|g, &z| *g *= act.derivative(z));
                delta = back;
            }
        }
        Ok(BatchGradients { grad, loss })
    }

    // ---- file format ----

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.arch.activation.tag());
        out.extend_from_slice(&(self.arch.input_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.arch.hidden_layers.len() as u32).to_le_bytes());
        for &h in &self.arch.hidden_layers {
            out.extend_from_slice(&(h as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.arch.output_dim as u32).to_le_bytes());
        for v in self.input_norm.mean.iter().chain(&self.input_norm.std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.target_scaling.to_array() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.data_fingerprint);
        for v in &self.params {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8], location: &str) -> Result<Self> {
        let corrupt = |message: &str| Error::Corrupt {
            location: location.to_string(),
            message: message.to_string(),
        };
        if bytes.len() < 4 + 4 + 1 + 12 + 32 || &bytes[..4] != MAGIC {
            return Err(corrupt("missing MWTM header"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch"));
        }
        let mut cur = Cursor { buf: body, pos: 4 };
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(corrupt(&format!("unsupported format version {version}")));
        }
        let activation = Activation::from_tag(cur.u8()?).ok_or_else(|| corrupt("unknown activation"))?;
        let input_dim = cur.u32()? as usize;
        let nh = cur.u32()? as usize;
        let hidden = (0..nh).map(|_| cur.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let output_dim = cur.u32()? as usize;
        let arch = MlpArchitecture::new(input_dim, hidden, output_dim, activation)?;
        let mean = cur.f64s(input_dim)?;
        let std = cur.f64s(input_dim)?;
        let ts = cur.f64s(4)?;
        let data_fingerprint: [u8; 32] = cur.take(32)?.try_into().expect("32 bytes");
        let params = cur.f64s(arch.n_params())?;
        if cur.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        let layers = layout(&arch);
        Ok(MlpModel {
            arch,
            params,
            input_norm: InputNorm { mean, std },
            target_scaling: TargetScaling::from_array([ts[0], ts[1], ts[2], ts[3]]),
            data_fingerprint,
            layers,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Corrupt {
                location: "model file".into(),
                message: "truncated".into(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(8 * n)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Single-sample forward pass.
pub fn mlp_forward(model: &MlpModel, x: &[f64]) -> Result<Vec<f64>> {
    let xv = ArrayView2::from_shape((1, x.len()), x).expect("row");
    Ok(model.forward_batch(&xv)?.into_raw_vec_and_offset().0)
}

/// Single-sample gradients of `||y - y_true||^2 / output_dim`.
pub fn mlp_backward(model: &MlpModel, x: &[f64], y_true: &[f64]) -> Result<BatchGradients> {
    let xv = ArrayView2::from_shape((1, x.len()), x).expect("row");
    let tv = ArrayView2::from_shape((1, y_true.len()), y_true).expect("row");
    model.backward_batch(&xv, &tv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn small() -> MlpModel {
        let arch = MlpArchitecture::new(4, vec![3], 2, Activation::Tanh).unwrap();
        MlpModel::init(arch, &mut rng::stream(1, &[])).unwrap()
    }

    #[test]
    fn zero_model_outputs_zero() {
        let arch = MlpArchitecture::new(5, vec![7, 3], 4, Activation::Relu).unwrap();
        let m = MlpModel::zeros(arch).unwrap();
        assert_eq!(mlp_forward(&m, &[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let m = small();
        let x = [0.3, -0.2, 0.9, 1.1];
        let y = mlp_forward(&m, &x).unwrap();
        let g = mlp_backward(&m, &x, &y).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn file_round_trip_and_checksum() {
        let m = small();
        let mut b = m.to_bytes();
        assert_eq!(MlpModel::from_bytes(&b, "mem").unwrap(), m);
        b[40] ^= 1;
        assert!(matches!(MlpModel::from_bytes(&b, "mem"), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn wrong_input_length_rejected() {
        assert!(mlp_forward(&small(), &[1.0]).is_err());
    }
}
