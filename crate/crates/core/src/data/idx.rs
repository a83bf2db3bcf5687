use std::fs;
use std::path::Path;

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw contents of an IDX image file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, image-major.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len().checked_div(self.rows * self.cols).unwrap_or(0)
    }
}

fn format_err(path: &Path, offset: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        file: path.to_path_buf(),
        offset: offset as u64,
        msg: msg.into(),
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(path, bytes.len(), format!("truncated header (needed bytes {at}..{})", at + 4)))
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != expected {
        return Err(format_err(path, 0, format!("bad magic {magic:#010x}, expected {expected:#010x}")));
    }
    Ok(())
}

fn check_len(bytes: &[u8], expected: usize, path: &Path) -> Result<()> {
    if bytes.len() < expected {
        return Err(format_err(
            path,
            bytes.len(),
            format!("truncated: expected {expected} bytes, file has {}", bytes.len()),
        ));
    }
    if bytes.len() > expected {
        return Err(format_err(path, expected, "trailing bytes after the declared data"));
    }
    Ok(())
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = fs::read(path)?;
    check_magic(&bytes, IMAGES_MAGIC, path)?;
    let n = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    check_len(&bytes, 16 + n * rows * cols, path)?;
    Ok(IdxImages {
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    check_magic(&bytes, LABELS_MAGIC, path)?;
    let n = be_u32(&bytes, 4, path)? as usize;
    check_len(&bytes, 8 + n, path)?;
    Ok(bytes[8..].to_vec())
}

pub fn write_idx_images(path: &Path, images: &IdxImages) -> Result<()> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend(IMAGES_MAGIC.to_be_bytes());
    out.extend((images.count() as u32).to_be_bytes());
    out.extend((images.rows as u32).to_be_bytes());
    out.extend((images.cols as u32).to_be_bytes());
    out.extend(&images.pixels);
    fs::write(path, out)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend(LABELS_MAGIC.to_be_bytes());
    out.extend((labels.len() as u32).to_be_bytes());
    out.extend(labels);
    fs::write(path, out)?;
    Ok(())
}

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// One split from an image/label file pair; pixels scaled to `[0, 1]`.
pub fn load_idx_pair(images: &Path, labels: &Path, split: Split) -> Result<Dataset> {
    let img = read_idx_images(images)?;
    let lab = read_idx_labels(labels)?;
    if img.count() != lab.len() {
        return Err(format_err(
            labels,
            4,
            format!("{} labels for {} images in {}", lab.len(), img.count(), images.display()),
        ));
    }
    let features = img.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let labels: Vec<usize> = lab.iter().map(|&l| l as usize).collect();
    let classes = labels.iter().max().map_or(10, |&m| (m + 1).max(10));
    Dataset::classification(split, img.rows * img.cols, classes, features, labels)
}

/// Reads the four standard MNIST files from `dir`.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train = load_idx_pair(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS), Split::Train)?;
    let test = load_idx_pair(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS), Split::Test)?;
    Ok((train, test))
}

/// Writes a classification dataset as an IDX pair (pixels quantized to bytes).
pub fn write_idx_pair(images: &Path, labels: &Path, data: &Dataset, rows: usize, cols: usize) -> Result<()> {
    let (Some(features), Some(ls)) = (data.features(), data.labels()) else {
        return Err(Error::data("only classification datasets can be written as IDX"));
    };
    if data.feature_dim() != Some(rows * cols) {
        return Err(Error::data("feature width does not match rows * cols"));
    }
    let pixels = features.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    write_idx_images(images, &IdxImages { rows, cols, pixels })?;
    let ls: Vec<u8> = ls
        .iter()
        .map(|&l| u8::try_from(l).map_err(|_| Error::data("label does not fit in a byte")))
        .collect::<Result<_>>()?;
    write_idx_labels(labels, &ls)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_zero_image_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        write_idx_images(&ip, &IdxImages { rows: 28, cols: 28, pixels: vec![0; 784] }).unwrap();
        write_idx_labels(&lp, &[7]).unwrap();
        let d = load_idx_pair(&ip, &lp, Split::Train).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.features().unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(d.labels().unwrap(), &[7]);
    }

    #[test]
    fn truncated_images_report_offset() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        write_idx_images(&ip, &IdxImages { rows: 2, cols: 2, pixels: vec![1; 8] }).unwrap();
        let mut bytes = fs::read(&ip).unwrap();
        bytes.truncate(21);
        fs::write(&ip, &bytes).unwrap();
        match read_idx_images(&ip).unwrap_err() {
            Error::Format { offset, file, .. } => {
                assert_eq!(offset, 21);
                assert_eq!(file, ip);
            }
            e => panic!("{e}"),
        }
        fs::write(&ip, &bytes[..10]).unwrap();
        assert!(matches!(read_idx_images(&ip), Err(Error::Format { offset: 10, .. })));
    }

    #[test]
    fn bad_magic_is_reported_at_zero() {
        let dir = tempfile::tempdir().unwrap();
        let lp = dir.path().join("lab");
        write_idx_labels(&lp, &[1, 2]).unwrap();
        assert!(matches!(read_idx_images(&lp), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn pixels_scale_to_unit_interval() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        write_idx_images(&ip, &IdxImages { rows: 1, cols: 2, pixels: vec![0, 255] }).unwrap();
        write_idx_labels(&lp, &[3]).unwrap();
        let d = load_idx_pair(&ip, &lp, Split::Test).unwrap();
        assert_eq!(d.features().unwrap(), &[0.0, 1.0]);
    }

    /// Runs against real MNIST when `SAMLAB_MNIST_DIR` points at the four IDX files.
    #[test]
    fn canonical_mnist_counts() {
        let Ok(dir) = std::env::var("SAMLAB_MNIST_DIR") else { return };
        let (train, test) = load_mnist(Path::new(&dir)).unwrap();
        assert_eq!((train.len(), test.len()), (60_000, 10_000));
    }
}
