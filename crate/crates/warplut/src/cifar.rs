//! Reader for the CIFAR-10 binary distribution.
//!
//! Each batch file holds fixed-size records: one label byte followed by
//! 3072 pixel bytes (the 32×32 red plane, then green, then blue).

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use warplut_core::data::RawImages;
use warplut_core::layers::Shape;

pub const IMAGE_BYTES: usize = 3 * 32 * 32;
pub const RECORD_BYTES: usize = IMAGE_BYTES + 1;
pub const RECORDS_PER_FILE: usize = 10_000;
/// Size of a complete batch file.
pub const FILE_BYTES: usize = RECORDS_PER_FILE * RECORD_BYTES;
pub const CLASSES: usize = 10;

pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

#[derive(Debug, thiserror::Error)]
pub enum CifarError {
    #[error("{path}: file not found")]
    Missing { path: PathBuf },
    #[error("{path}: truncated at byte offset {offset} (expected {expected} bytes)")]
    Truncated { path: PathBuf, offset: usize, expected: usize },
    #[error("{path}: label {label} out of range at byte offset {offset}")]
    Label { path: PathBuf, offset: usize, label: u8 },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// The 50,000 training and 10,000 test images.
#[derive(Debug, Clone)]
pub struct Cifar10 {
    pub train: RawImages,
    pub test: RawImages,
}

fn image_shape() -> Shape {
    Shape::image(3, 32, 32)
}

/// Parses one batch file holding exactly `records` records.
pub fn load_batch_file(path: &Path, records: usize) -> Result<RawImages, CifarError> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CifarError::Missing { path: path.into() },
        _ => CifarError::Io {
            path: path.into(),
            source: e,
        },
    })?;
    let expected = records * RECORD_BYTES;
    if bytes.len() < expected {
        // offset of the first incomplete record
        let offset = bytes.len() / RECORD_BYTES * RECORD_BYTES;
        return Err(CifarError::Truncated {
            path: path.into(),
            offset,
            expected,
        });
    }
    let mut labels = Vec::with_capacity(records);
    let mut pixels = Vec::with_capacity(records * IMAGE_BYTES);
    for (r, rec) in bytes[..expected].chunks_exact(RECORD_BYTES).enumerate() {
        if rec[0] as usize >= CLASSES {
            return Err(CifarError::Label {
                path: path.into(),
                offset: r * RECORD_BYTES,
                label: rec[0],
            });
        }
        labels.push(rec[0]);
        pixels.extend_from_slice(&rec[1..]);
    }
    Ok(RawImages {
        shape: image_shape(),
        pixels,
        labels,
        classes: CLASSES,
    })
}

fn concat(parts: Vec<RawImages>) -> RawImages {
    let mut out = RawImages {
        shape: image_shape(),
        pixels: Vec::new(),
        labels: Vec::new(),
        classes: CLASSES,
    };
    for p in parts {
        out.pixels.extend(p.pixels);
        out.labels.extend(p.labels);
    }
    out
}

/// Loads the standard layout from `dir`. Files are read in parallel.
pub fn load_cifar10_binary(dir: &Path) -> Result<Cifar10, CifarError> {
    load_cifar10_with(dir, RECORDS_PER_FILE)
}

/// As [`load_cifar10_binary`] with a custom number of records per file.
pub fn load_cifar10_with(dir: &Path, records_per_file: usize) -> Result<Cifar10, CifarError> {
    if !dir.is_dir() {
        return Err(CifarError::Missing { path: dir.into() });
    }
    let names: Vec<&str> = TRAIN_FILES.iter().copied().chain([TEST_FILE]).collect();
    let mut parts = names
        .par_iter()
        .map(|n| load_batch_file(&dir.join(n), records_per_file))
        .collect::<Result<Vec<_>, _>>()?;
    let test = parts.pop().expect("six files");
    Ok(Cifar10 {
        train: concat(parts),
        test,
    })
}

/// Writes `images` in the batch-file format. Used for fixtures.
pub fn write_batch_file(path: &Path, images: &RawImages) -> std::io::Result<()> {
    let mut bytes = Vec::with_capacity(images.len() * RECORD_BYTES);
    for (l, img) in images.labels.iter().zip(images.pixels.chunks(IMAGE_BYTES)) {
        bytes.push(*l);
        bytes.extend_from_slice(img);
    }
    fs::write(path, bytes)
}
