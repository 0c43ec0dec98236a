//! IDX container format (MNIST / Fashion-MNIST).
//!
//! Layout: a big-endian `u32` magic (`0x0000_0803` for 3-d `u8` images,
//! `0x0000_0801` for 1-d `u8` labels), one big-endian `u32` per dimension,
//! then exactly `Π dims` payload bytes. Gzip-compressed files are detected by
//! their `1f 8b` header and decompressed transparently.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::{Array2, ArrayView2};

use crate::error::{QelmError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// `count` grayscale images of `rows x cols` pixels, stored contiguously.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageTensor {
    count: usize,
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl ImageTensor {
    pub fn new(count: usize, rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != count * rows * cols {
            return Err(QelmError::Dimension(format!(
                "{} pixels for {count} images of {rows}x{cols}",
                pixels.len()
            )));
        }
        Ok(Self { count, rows, cols, pixels })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn image_bytes(&self, i: usize) -> &[u8] {
        let len = self.rows * self.cols;
        &self.pixels[i * len..(i + 1) * len]
    }

    pub fn image(&self, i: usize) -> ArrayView2<'_, u8> {
        ArrayView2::from_shape((self.rows, self.cols), self.image_bytes(i)).expect("shape checked at construction")
    }

    /// Image `i` as real intensities in `[0, 255]`.
    pub fn image_f64(&self, i: usize) -> Array2<f64> {
        self.image(i).mapv(f64::from)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.rows * self.cols);
        for &i in indices {
            pixels.extend_from_slice(self.image_bytes(i));
        }
        Self { count: indices.len(), rows: self.rows, cols: self.cols, pixels }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IdxFile {
    Images(ImageTensor),
    Labels(Vec<u8>),
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4-byte slice")))
        .ok_or_else(|| QelmError::Truncation(format!("header ends before byte {}", offset + 4)))
}

fn maybe_gunzip(bytes: &[u8]) -> Result<std::borrow::Cow<'_, [u8]>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| QelmError::Format(format!("gzip stream: {e}")))?;
        Ok(out.into())
    } else {
        Ok(bytes.into())
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxFile> {
    let bytes = maybe_gunzip(bytes)?;
    let magic = read_u32(&bytes, 0)?;
    let n_dims = match magic {
        IMAGES_MAGIC => 3,
        LABELS_MAGIC => 1,
        other => {
            return Err(QelmError::Format(format!(
                "unsupported magic 0x{other:08x} (expected 0x{IMAGES_MAGIC:08x} or 0x{LABELS_MAGIC:08x})"
            )))
        }
    };
    let dims = (0..n_dims)
        .map(|i| read_u32(&bytes, 4 + 4 * i).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * n_dims;
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| QelmError::Format("dimension product overflows".into()))?;
    let payload = &bytes[header..];
    if payload.len() != expected {
        return Err(QelmError::Truncation(format!(
            "payload has {} bytes, header announces {expected}",
            payload.len()
        )));
    }
    Ok(match n_dims {
        3 => IdxFile::Images(ImageTensor::new(dims[0], dims[1], dims[2], payload.to_vec())?),
        _ => IdxFile::Labels(payload.to_vec()),
    })
}

/// Uncompressed IDX serialization; inverse of [`parse_idx`].
pub fn write_idx(file: &IdxFile) -> Vec<u8> {
    let mut out = Vec::new();
    match file {
        IdxFile::Images(t) => {
            out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
            for d in [t.count, t.rows, t.cols] {
                out.extend_from_slice(&(d as u32).to_be_bytes());
            }
            out.extend_from_slice(&t.pixels);
        }
        IdxFile::Labels(l) => {
            out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
            out.extend_from_slice(&(l.len() as u32).to_be_bytes());
            out.extend_from_slice(l);
        }
    }
    out
}

/// Images together with their labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageSet {
    images: ImageTensor,
    labels: Vec<u8>,
}

impl ImageSet {
    pub fn new(images: ImageTensor, labels: Vec<u8>) -> Result<Self> {
        if images.count() != labels.len() {
            return Err(QelmError::Dimension(format!(
                "{} images but {} labels",
                images.count(),
                labels.len()
            )));
        }
        Ok(Self { images, labels })
    }

    pub fn images(&self) -> &ImageTensor {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn load(images_path: &Path, labels_path: &Path) -> Result<Self> {
        let read = |p: &Path| fs::read(p).map_err(|e| QelmError::io(p, e));
        let images = match parse_idx(&read(images_path)?)? {
            IdxFile::Images(t) => t,
            IdxFile::Labels(_) => {
                return Err(QelmError::Format(format!("{} holds labels, not images", images_path.display())))
            }
        };
        let labels = match parse_idx(&read(labels_path)?)? {
            IdxFile::Labels(l) => l,
            IdxFile::Images(_) => {
                return Err(QelmError::Format(format!("{} holds images, not labels", labels_path.display())))
            }
        };
        Self::new(images, labels)
    }
}
