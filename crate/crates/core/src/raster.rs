//! `MWTR` raster files.
//!
//! Layout: magic `MWTR`, `u32` rows, `u32` cols, `u8` dtype (0 = f32, 1 = f64),
//! then the little-endian row-major payload. One quantity per file.

use ndarray::Array2;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MWTR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32 = 0,
    F64 = 1,
}

pub fn encode(a: &Array2<f64>, dtype: DType) -> Vec<u8> {
    let (rows, cols) = a.dim();
    let width = if dtype == DType::F32 { 4 } else { 8 };
    let mut out = Vec::with_capacity(13 + rows * cols * width);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.push(dtype as u8);
    for &v in a.iter() {
        match dtype {
            DType::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            DType::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

pub fn decode(bytes: &[u8], location: &str) -> Result<Array2<f64>> {
    let corrupt = |message: String| Error::Corrupt {
        location: location.to_string(),
        message,
    };
    if bytes.len() < 13 || &bytes[..4] != MAGIC {
        return Err(corrupt("missing MWTR header".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let width = match bytes[12] {
        0 => 4,
        1 => 8,
        t => return Err(corrupt(format!("unknown dtype tag {t}"))),
    };
    let payload = &bytes[13..];
    if payload.len() != rows * cols * width {
        return Err(corrupt(format!(
            "payload is {} bytes, header implies {}",
            payload.len(),
            rows * cols * width
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(width)
        .map(|c| {
            if width == 4 {
                f32::from_le_bytes(c.try_into().unwrap()) as f64
            } else {
                f64::from_le_bytes(c.try_into().unwrap())
            }
        })
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
}

pub fn write(path: &Path, a: &Array2<f64>, dtype: DType) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(a, dtype)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Array2<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_f64_is_exact() {
        let a = Array2::from_shape_fn((3, 5), |(r, c)| (r * 7 + c) as f64 * 0.1 + 1e-17);
        let b = decode(&encode(&a, DType::F64), "mem").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn f32_payload_is_widened() {
        let a = Array2::from_shape_fn((2, 2), |(r, c)| (r + c) as f64 + 0.5);
        let bytes = encode(&a, DType::F32);
        assert_eq!(bytes.len(), 13 + 16);
        assert_eq!(decode(&bytes, "mem").unwrap(), a);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let a = Array2::<f64>::zeros((4, 4));
        let mut bytes = encode(&a, DType::F64);
        bytes.pop();
        assert!(matches!(decode(&bytes, "x"), Err(Error::Corrupt { .. })));
        assert!(decode(b"NOPE", "x").is_err());
    }
}
