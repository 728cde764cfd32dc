//! MNIST IDX loading and pixel-to-drive encoding.
//!
//! IDX files are big-endian: a 4-byte magic (`0x00000803` for images,
//! `0x00000801` for labels), one 4-byte count per dimension, then raw bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{file_error, Error, Result};
use crate::snn::RateTransfer;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const DATA_DIR_ENV: &str = "MNIST_DIR";
/// Default observation window of an encoded input.
pub const DEFAULT_WINDOW: f64 = 50e-6;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Raw `N x rows x cols` image bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4-byte slice")))
        .ok_or_else(|| Error::TruncatedFile {
            path: path.to_path_buf(),
            needed: at + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = read_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], header: usize, len: usize, path: &Path) -> Result<&'a [u8]> {
    let needed = header + len;
    if bytes.len() < needed {
        return Err(Error::TruncatedFile {
            path: path.to_path_buf(),
            needed,
            found: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::DimensionMismatch(format!(
            "{}: {} trailing bytes after the declared data",
            path.display(),
            bytes.len() - needed
        )));
    }
    Ok(&bytes[header..])
}

pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    check_magic(bytes, IMAGE_MAGIC, path)?;
    let count = read_u32(bytes, 4, path)? as usize;
    let rows = read_u32(bytes, 8, path)? as usize;
    let cols = read_u32(bytes, 12, path)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}: zero image dimension",
            path.display()
        )));
    }
    let pixels = payload(bytes, 16, count * rows * cols, path)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC, path)?;
    let count = read_u32(bytes, 4, path)? as usize;
    let labels = payload(bytes, 8, count, path)?;
    if let Some(index) = labels.iter().position(|&l| l > 9) {
        return Err(Error::LabelOutOfRange {
            path: path.to_path_buf(),
            index,
            label: labels[index],
        });
    }
    Ok(labels.to_vec())
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    parse_idx_images(&fs::read(path).map_err(file_error(path))?, path)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    parse_idx_labels(&fs::read(path).map_err(file_error(path))?, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Paired images and labels. Pixels stay as bytes; [`Dataset::pixel`]
/// normalizes by 255 on access.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub split: Split,
    pub rows: usize,
    pub cols: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn pair(split: Split, images: IdxImages, labels: Vec<u8>) -> Result<Self> {
        if images.count != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} images but {} labels",
                images.count,
                labels.len()
            )));
        }
        if let Some(index) = labels.iter().position(|&l| l > 9) {
            return Err(Error::LabelOutOfRange {
                path: PathBuf::new(),
                index,
                label: labels[index],
            });
        }
        Ok(Dataset {
            split,
            rows: images.rows,
            cols: images.cols,
            pixels: images.pixels,
            labels,
        })
    }

    /// Load one split from a directory holding the four standard files.
    pub fn load(dir: impl AsRef<Path>, split: Split) -> Result<Self> {
        let dir = dir.as_ref();
        let (img, lab) = match split {
            Split::Train => (TRAIN_IMAGES, TRAIN_LABELS),
            Split::Test => (TEST_IMAGES, TEST_LABELS),
        };
        Self::pair(
            split,
            load_idx_images(dir.join(img))?,
            load_idx_labels(dir.join(lab))?,
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn raw_image(&self, i: usize) -> &[u8] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn image(&self, i: usize) -> Vec<f64> {
        self.raw_image(i).iter().map(|&p| pixel_value(p)).collect()
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// First `n` samples (or all, if fewer).
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Dataset {
            pixels: self.pixels[..n * self.image_len()].to_vec(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
            rows: self.rows,
            cols: self.cols,
        }
    }

    /// Samples at the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.image_len());
        for &i in indices {
            pixels.extend_from_slice(self.raw_image(i));
        }
        Dataset {
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split: self.split,
            rows: self.rows,
            cols: self.cols,
        }
    }
}

/// Byte to `[0, 1]` intensity.
pub fn pixel_value(p: u8) -> f64 {
    p as f64 / 255.0
}

/// Constant per-pixel drive over an observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub drives: Vec<f64>,
    pub window: f64,
}

/// `drive = v_lo + pixel * (v_hi - v_lo)` on the transfer normalization.
pub fn encode_rate(image: &[f64], transfer: &RateTransfer, window: f64) -> Result<EncodedInput> {
    if !(window > 0.0) {
        return Err(Error::InvalidParameter("window must be > 0".into()));
    }
    if image.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter("pixels must lie in [0, 1]".into()));
    }
    Ok(EncodedInput {
        drives: image.iter().map(|&p| transfer.to_volts(p)).collect(),
        window,
    })
}

/// Inverse of [`encode_rate`].
pub fn decode_rate(input: &EncodedInput, transfer: &RateTransfer) -> Vec<f64> {
    input
        .drives
        .iter()
        .map(|&v| transfer.to_normalized(v))
        .collect()
}

/// `--data-dir` if given, else `$MNIST_DIR`, else `data/mnist` under the
/// workspace root.
pub fn resolve_data_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(DATA_DIR_ENV) {
        return PathBuf::from(p);
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}
