//! Fixed-stride record file.
//!
//! ```text
//! header (128 bytes):
//!   "MWTD" | u32 version | u32 n | u32 views | u32 receivers | u32 reserved
//!   u64 stride | u64 header_len
//!   u32 offsets of eps, sigma, labels, matrix, checksum within a record
//!   f64 frequency | [u8; 32] fingerprint | zero padding
//! record (stride bytes):
//!   u64 id | u8 class | 7 pad | u64 seed
//!   f64 eps_r[n*n] | f64 sigma[n*n] | u8 labels[n*n] (padded to 8)
//!   (f64 re, f64 im)[views*receivers]
//!   sha256 of everything above
//! ```
//!
//! All numbers are little-endian; rasters are row-major.

use ndarray::Array2;
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::forward::ScatteringMatrix;
use crate::grid::Grid;
use crate::medium::DielectricMap;
use crate::phantom::{BreastClass, TissueLabelMap};

const MAGIC: &[u8; 4] = b"MWTD";
const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 128;
const RECORD_HEAD: usize = 24;

/// One stored (phantom, noise-free scattering matrix) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub phantom_id: u64,
    pub class_id: BreastClass,
    /// Seed the phantom was generated from (differs from the nominal one after a retry).
    pub seed: u64,
    pub dielectrics: DielectricMap,
    pub labels: TissueLabelMap,
    pub matrix: ScatteringMatrix,
}

/// Byte layout of a record for a given problem size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub views: usize,
    pub receivers: usize,
}

impl Layout {
    fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn eps_offset(&self) -> usize {
        RECORD_HEAD
    }

    pub fn sigma_offset(&self) -> usize {
        self.eps_offset() + 8 * self.cells()
    }

    pub fn labels_offset(&self) -> usize {
        self.sigma_offset() + 8 * self.cells()
    }

    pub fn matrix_offset(&self) -> usize {
        self.labels_offset() + self.cells().div_ceil(8) * 8
    }

    pub fn checksum_offset(&self) -> usize {
        self.matrix_offset() + 16 * self.views * self.receivers
    }

    pub fn stride(&self) -> usize {
        self.checksum_offset() + 32
    }
}

/// Serialise a record into exactly `layout.stride()` bytes.
pub fn encode_record(rec: &DatasetRecord, layout: &Layout) -> Vec<u8> {
    let mut out = Vec::with_capacity(layout.stride());
    out.extend_from_slice(&rec.phantom_id.to_le_bytes());
    out.push(rec.class_id.index() as u8);
    out.extend_from_slice(&[0u8; 7]);
    out.extend_from_slice(&rec.seed.to_le_bytes());
    for v in rec.dielectrics.eps_r.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in rec.dielectrics.sigma.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(rec.labels.labels.iter());
    out.resize(layout.matrix_offset(), 0);
    for z in rec.matrix.values.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    debug_assert_eq!(out.len(), layout.stride());
    out
}

fn f64s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect()
}

/// Parse and checksum-verify a record.
pub fn decode_record(
    bytes: &[u8],
    layout: &Layout,
    grid: Grid,
    frequency: f64,
    fingerprint: [u8; 32],
    location: &str,
) -> Result<DatasetRecord> {
    let corrupt = |message: String| Error::Corrupt {
        location: location.to_string(),
        message,
    };
    if bytes.len() != layout.stride() {
        return Err(corrupt(format!("record is {} bytes, expected {}", bytes.len(), layout.stride())));
    }
    let body = &bytes[..layout.checksum_offset()];
    if Sha256::digest(body).as_slice() != &bytes[layout.checksum_offset()..] {
        return Err(corrupt("payload checksum mismatch".into()));
    }
    let phantom_id = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
    let class_id = BreastClass::from_index(bytes[8] as usize).ok_or_else(|| corrupt(format!("bad class {}", bytes[8])))?;
    let seed = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let shape = (layout.n, layout.n);
    let eps = f64s(&bytes[layout.eps_offset()..layout.sigma_offset()]);
    let sigma = f64s(&bytes[layout.sigma_offset()..layout.labels_offset()]);
    let labels = bytes[layout.labels_offset()..layout.labels_offset() + layout.cells()].to_vec();
    let values: Vec<Complex64> = bytes[layout.matrix_offset()..layout.checksum_offset()]
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    let dielectrics = DielectricMap::new(
        grid,
        Array2::from_shape_vec(shape, eps).expect("sized"),
        Array2::from_shape_vec(shape, sigma).expect("sized"),
    )
    .map_err(|e| corrupt(e.to_string()))?;
    Ok(DatasetRecord {
        phantom_id,
        class_id,
        seed,
        dielectrics,
        labels: TissueLabelMap {
            grid,
            labels: Array2::from_shape_vec(shape, labels).expect("sized"),
        },
        matrix: ScatteringMatrix {
            values: Array2::from_shape_vec((layout.views, layout.receivers), values).expect("sized"),
            frequency,
            fingerprint,
        },
    })
}

/// File-level header.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreHeader {
    pub layout: Layout,
    pub frequency: f64,
    pub fingerprint: [u8; 32],
}

impl StoreHeader {
    pub fn to_bytes(&self) -> Vec<u8> {
        let l = &self.layout;
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(MAGIC);
        for v in [VERSION, l.n as u32, l.views as u32, l.receivers as u32, 0] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(l.stride() as u64).to_le_bytes());
        out.extend_from_slice(&(HEADER_LEN as u64).to_le_bytes());
        for off in [l.eps_offset(), l.sigma_offset(), l.labels_offset(), l.matrix_offset(), l.checksum_offset()] {
            out.extend_from_slice(&(off as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.frequency.to_le_bytes());
        out.extend_from_slice(&self.fingerprint);
        out.resize(HEADER_LEN, 0);
        out
    }

    pub fn from_bytes(bytes: &[u8], location: &str) -> Result<Self> {
        let corrupt = |message: String| Error::Corrupt {
            location: location.to_string(),
            message,
        };
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(corrupt("missing MWTD header".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap()) as usize;
        if u32_at(4) as u32 != VERSION {
            return Err(corrupt(format!("unsupported version {}", u32_at(4))));
        }
        let layout = Layout {
            n: u32_at(8),
            views: u32_at(12),
            receivers: u32_at(16),
        };
        if u64_at(24) != layout.stride() || u64_at(32) != HEADER_LEN {
            return Err(corrupt("stride table does not match the record dimensions".into()));
        }
        let offsets: Vec<usize> = (0..5).map(|i| u32_at(40 + 4 * i)).collect();
        let expected = [
            layout.eps_offset(),
            layout.sigma_offset(),
            layout.labels_offset(),
            layout.matrix_offset(),
            layout.checksum_offset(),
        ];
        if offsets != expected {
            return Err(corrupt("record offsets do not match the layout".into()));
        }
        let frequency = f64::from_le_bytes(bytes[60..68].try_into().unwrap());
        let mut fingerprint = [0u8; 32];
        fingerprint.copy_from_slice(&bytes[68..100]);
        Ok(StoreHeader {
            layout,
            frequency,
            fingerprint,
        })
    }
}

/// Handle on a record file. Records are immutable once written.
#[derive(Debug, Clone)]
pub struct DatasetStore {
    pub path: PathBuf,
    pub header: StoreHeader,
    pub grid: Grid,
    pub n_records: usize,
}

impl DatasetStore {
    /// Open an existing file; a trailing partial record is ignored.
    pub fn open(path: &Path, grid: Grid) -> Result<Self> {
        let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut head = vec![0u8; HEADER_LEN];
        f.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
        let header = StoreHeader::from_bytes(&head, &path.display().to_string())?;
        if header.layout.n != grid.n {
            return Err(Error::ConfigMismatch(format!(
                "store holds {}x{} rasters, configuration asks for {}x{}",
                header.layout.n, header.layout.n, grid.n, grid.n
            )));
        }
        let len = f.metadata().map_err(|e| Error::io(path, e))?.len() as usize;
        let n_records = (len - HEADER_LEN) / header.layout.stride();
        Ok(DatasetStore {
            path: path.to_path_buf(),
            header,
            grid,
            n_records,
        })
    }

    /// Create an empty file with the given header, replacing nothing.
    pub fn create(path: &Path, header: StoreHeader, grid: Grid) -> Result<Self> {
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        f.write_all(&header.to_bytes()).map_err(|e| Error::io(path, e))?;
        Ok(DatasetStore {
            path: path.to_path_buf(),
            header,
            grid,
            n_records: 0,
        })
    }

    pub fn stride(&self) -> usize {
        self.header.layout.stride()
    }

    fn location(&self, index: usize) -> String {
        format!("{} record {index}", self.path.display())
    }

    /// Read and verify record `index`.
    pub fn read(&self, index: usize) -> Result<DatasetRecord> {
        let mut f = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        self.read_with(&mut f, index)
    }

    pub(crate) fn read_with(&self, f: &mut File, index: usize) -> Result<DatasetRecord> {
        if index >= self.n_records {
            return Err(Error::invalid(format!("record {index} out of range ({} stored)", self.n_records)));
        }
        let mut buf = vec![0u8; self.stride()];
        f.seek(SeekFrom::Start((HEADER_LEN + index * self.stride()) as u64))
            .and_then(|_| f.read_exact(&mut buf))
            .map_err(|e| Error::io(&self.path, e))?;
        let rec = decode_record(
            &buf,
            &self.header.layout,
            self.grid,
            self.header.frequency,
            self.header.fingerprint,
            &self.location(index),
        )?;
        if rec.phantom_id != index as u64 {
            return Err(Error::Corrupt {
                location: self.location(index),
                message: format!("holds phantom id {}", rec.phantom_id),
            });
        }
        Ok(rec)
    }

    /// Verify every stored record's checksum.
    pub fn verify(&self) -> Result<()> {
        let mut f = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        for i in 0..self.n_records {
            self.read_with(&mut f, i)?;
        }
        Ok(())
    }

    /// Drop any trailing partial record, then append encoded records.
    pub(crate) fn append(&mut self, encoded: &[Vec<u8>]) -> Result<()> {
        let mut f = OpenOptions::new()
            .write(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        let end = (HEADER_LEN + self.n_records * self.stride()) as u64;
        f.set_len(end).map_err(|e| Error::io(&self.path, e))?;
        f.seek(SeekFrom::Start(end)).map_err(|e| Error::io(&self.path, e))?;
        for rec in encoded {
            debug_assert_eq!(rec.len(), self.stride());
            f.write_all(rec).map_err(|e| Error::io(&self.path, e))?;
        }
        f.sync_data().map_err(|e| Error::io(&self.path, e))?;
        self.n_records += encoded.len();
        Ok(())
    }
}
