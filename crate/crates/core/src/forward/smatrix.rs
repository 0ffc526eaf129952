use ndarray::Array2;
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MWTS";

/// Scattered field at every receiver (columns) for every transmitter view (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub values: Array2<Complex64>,
    /// Hz.
    pub frequency: f64,
    /// Hash of the physics that produced the data.
    pub fingerprint: [u8; 32],
}

impl ScatteringMatrix {
    pub fn n_views(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_receivers(&self) -> usize {
        self.values.ncols()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Mean power per entry.
    pub fn mean_power(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.values.len().max(1) as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Byte length of the encoding for an `nv x nr` matrix.
    pub fn encoded_len(nv: usize, nr: usize) -> usize {
        4 + 4 + 4 + 8 + nv * nr * 16 + 32
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (nv, nr) = self.values.dim();
        let mut out = Vec::with_capacity(Self::encoded_len(nv, nr));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(nv as u32).to_le_bytes());
        out.extend_from_slice(&(nr as u32).to_le_bytes());
        out.extend_from_slice(&self.frequency.to_le_bytes());
        for z in self.values.iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out.extend_from_slice(&self.fingerprint);
        out
    }

    pub fn from_bytes(bytes: &[u8], location: &str) -> Result<Self> {
        let corrupt = |message: String| Error::Corrupt {
            location: location.to_string(),
            message,
        };
        if bytes.len() < 20 || &bytes[..4] != MAGIC {
            return Err(corrupt("missing MWTS header".into()));
        }
        let nv = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let nr = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if bytes.len() != Self::encoded_len(nv, nr) {
            return Err(corrupt(format!(
                "{} bytes, header implies {}",
                bytes.len(),
                Self::encoded_len(nv, nr)
            )));
        }
        let frequency = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let payload = &bytes[20..20 + nv * nr * 16];
        let data: Vec<Complex64> = payload
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        let mut fingerprint = [0u8; 32];
        fingerprint.copy_from_slice(&bytes[bytes.len() - 32..]);
        Ok(ScatteringMatrix {
            values: Array2::from_shape_vec((nv, nr), data).expect("length checked"),
            frequency,
            fingerprint,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}
