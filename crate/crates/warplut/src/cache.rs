//! Versioned binary cache of encoded datasets.
//!
//! Layout (little-endian): magic `WLUT`, `u32` format version, `u32`
//! classes, `u32` channels, `u32` height, `u32` width, `u64` examples, then
//! one `u32` label per example, then each example's bits packed LSB-first
//! into `ceil(dim / 8)` bytes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use warplut_core::data::Dataset;
use warplut_core::layers::Shape;

pub const MAGIC: &[u8; 4] = b"WLUT";
pub const CACHE_VERSION: u32 = 1;
const HEADER: usize = 4 + 4 * 5 + 8;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("not a dataset cache (bad magic)")]
    Magic,
    #[error("cache format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("cache truncated: {actual} bytes, expected {expected}")]
    Truncated { expected: usize, actual: usize },
    #[error(transparent)]
    Invalid(#[from] warplut_core::Error),
}

pub fn encode_cache(ds: &Dataset) -> Vec<u8> {
    let s = ds.shape();
    let row = ds.dim().div_ceil(8);
    let mut out = Vec::with_capacity(HEADER + ds.len() * (4 + row));
    out.extend_from_slice(MAGIC);
    for v in [CACHE_VERSION, ds.classes() as u32, s.channels as u32, s.height as u32, s.width as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    for &l in ds.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    for i in 0..ds.len() {
        let mut packed = vec![0u8; row];
        for (j, &b) in ds.example(i).iter().enumerate() {
            packed[j / 8] |= (b & 1) << (j % 8);
        }
        out.extend_from_slice(&packed);
    }
    out
}

pub fn decode_cache(bytes: &[u8]) -> Result<Dataset, CacheError> {
    if bytes.len() < HEADER {
        return Err(CacheError::Truncated {
            expected: HEADER,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(CacheError::Magic);
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != CACHE_VERSION {
        return Err(CacheError::Version {
            found: version,
            expected: CACHE_VERSION,
        });
    }
    let classes = u32_at(8) as usize;
    let shape = Shape::image(u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize);
    let n = u64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes")) as usize;
    let dim = shape.dim();
    let row = dim.div_ceil(8);
    let expected = HEADER + n * 4 + n * row;
    if bytes.len() != expected {
        return Err(CacheError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let labels = (0..n).map(|i| u32_at(HEADER + 4 * i)).collect();
    let bits = &bytes[HEADER + 4 * n..];
    let mut inputs = Vec::with_capacity(n * dim);
    for packed in bits.chunks(row.max(1)).take(n) {
        inputs.extend((0..dim).map(|j| (packed[j / 8] >> (j % 8)) & 1));
    }
    Ok(Dataset::new(shape, inputs, labels, classes)?)
}

pub fn write_cache(path: &Path, ds: &Dataset) -> Result<(), CacheError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_cache(ds))?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<Dataset, CacheError> {
    decode_cache(&fs::read(path)?)
}
