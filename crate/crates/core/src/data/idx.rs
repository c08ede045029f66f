//! IDX binary format (big-endian header, unsigned byte payload) as used by MNIST.

use std::path::Path;

use crate::data::Dataset;
use crate::error::{DataError, Error, Result};
use crate::tensor::Matrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

const MNIST_CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count · rows · cols` bytes, image-major then row-major
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let len = self.rows * self.cols;
        &self.pixels[i * len..(i + 1) * len]
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> std::result::Result<u32, DataError> {
    let end = offset + 4;
    let chunk = bytes.get(offset..end).ok_or(DataError::Truncated {
        needed: end,
        available: bytes.len(),
    })?;
    Ok(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
}

fn expect_magic(bytes: &[u8], expected: u32) -> std::result::Result<(), DataError> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(DataError::BadMagic { expected, found });
    }
    Ok(())
}

fn payload(
    bytes: &[u8],
    header: usize,
    len: Option<usize>,
) -> std::result::Result<&[u8], DataError> {
    let needed = len
        .and_then(|l| l.checked_add(header))
        .ok_or(DataError::Malformed {
            line: 0,
            detail: "declared dimensions overflow".into(),
        })?;
    if bytes.len() < needed {
        return Err(DataError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    Ok(&bytes[header..needed])
}

pub fn parse_idx_images(bytes: &[u8]) -> std::result::Result<IdxImages, DataError> {
    expect_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let len = count.checked_mul(rows).and_then(|v| v.checked_mul(cols));
    let pixels = payload(bytes, 16, len)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> std::result::Result<Vec<u8>, DataError> {
    expect_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, Some(count))?.to_vec())
}

/// Builds a dataset from parsed IDX parts. Each image is flattened row-major into a
/// `rows·cols × 1` sequence with pixels scaled by 1/255.
pub fn idx_to_dataset(images: &IdxImages, labels: &[u8]) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(DataError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        }
        .into());
    }
    if images.count == 0 {
        return Err(DataError::Empty.into());
    }
    if let Some((i, &l)) = labels
        .iter()
        .enumerate()
        .find(|(_, &l)| l as usize >= MNIST_CLASSES)
    {
        return Err(DataError::UnknownLabel {
            line: i,
            value: l.to_string(),
        }
        .into());
    }
    let len = images.rows * images.cols;
    let sequences = (0..images.count)
        .map(|i| {
            Matrix::from_vec(
                len,
                1,
                images
                    .image(i)
                    .iter()
                    .map(|&p| f64::from(p) / 255.0)
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        "mnist",
        sequences,
        labels.iter().map(|&l| l as usize).collect(),
        MNIST_CLASSES,
    )
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let image_bytes = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let images = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    idx_to_dataset(&images, &labels)
}
