//! IDX files as used by MNIST and fashion-mnist: big-endian headers, magic
//! 2051 (unsigned-byte images, three dimensions) and 2049 (labels, one).

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    path: &'a Path,
    bytes: Vec<u8>,
    offset: usize,
}

impl<'a> Reader<'a> {
    fn open(path: &'a Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Reader {
            path,
            bytes,
            offset: 0,
        })
    }

    fn error(&self, offset: usize, reason: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self.offset + n;
        if end > self.bytes.len() {
            return Err(self.error(
                self.offset,
                format!(
                    "truncated file: {what} needs {n} bytes, {} remain",
                    self.bytes.len() - self.offset
                ),
            ));
        }
        let start = self.offset;
        self.offset = end;
        Ok(&self.bytes[start..end])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32("magic number")?;
        if found != expected {
            return Err(self.error(
                0,
                format!("bad magic number {found:#010x}, expected {expected:#010x}"),
            ));
        }
        Ok(())
    }

    fn count(&mut self) -> Result<usize> {
        let offset = self.offset;
        let n = self.u32("item count")? as usize;
        if n == 0 {
            return Err(self.error(offset, "file contains zero items"));
        }
        Ok(n)
    }
}

/// Loads an image/label file pair; pixels are scaled to `[0, 1]`.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    n_classes: usize,
) -> Result<Dataset> {
    let mut images = Reader::open(images_path.as_ref())?;
    images.magic(IMAGE_MAGIC)?;
    let n_images = images.count()?;
    let rows = images.u32("row count")? as usize;
    let cols = images.u32("column count")? as usize;
    if rows == 0 || cols == 0 {
        return Err(images.error(8, format!("degenerate image shape {rows}x{cols}")));
    }
    let pixels = images.take(n_images * rows * cols, "pixel data")?;
    let features: Vec<f64> = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();

    let mut labels_file = Reader::open(labels_path.as_ref())?;
    labels_file.magic(LABEL_MAGIC)?;
    let n_labels = labels_file.count()?;
    if n_labels != n_images {
        return Err(labels_file.error(
            4,
            format!(
                "label count {n_labels} does not match image count {n_images} in {}",
                images.path.display()
            ),
        ));
    }
    let start = labels_file.offset;
    let raw = labels_file.take(n_labels, "label data")?.to_vec();
    if let Some(i) = raw.iter().position(|&l| usize::from(l) >= n_classes) {
        return Err(labels_file.error(
            start + i,
            format!("label {} outside [0, {n_classes})", raw[i]),
        ));
    }
    let labels: Vec<usize> = raw.into_iter().map(usize::from).collect();

    let name = images
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".to_string());
    Dataset::new(name, rows * cols, n_classes, features, labels)
}

/// Writes `d` as an IDX pair with the given image shape. Features are
/// quantized to `round(255 · x)` after clamping to `[0, 1]`.
pub fn write_idx(
    d: &Dataset,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if rows * cols != d.input_dim() {
        return Err(Error::DimensionMismatch {
            left: rows * cols,
            right: d.input_dim(),
        });
    }
    if d.n_classes() > 256 {
        return Err(Error::invalid("n_classes", "IDX labels hold at most 256 classes"));
    }
    let mut img = Vec::with_capacity(16 + d.features().len());
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for v in [d.len(), rows, cols] {
        img.extend_from_slice(&(v as u32).to_be_bytes());
    }
    img.extend(
        d.features()
            .iter()
            .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    let mut lab = Vec::with_capacity(8 + d.len());
    lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(d.len() as u32).to_be_bytes());
    lab.extend(d.labels().iter().map(|&l| l as u8));

    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    fs::write(images_path, img).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, lab).map_err(|e| Error::io(labels_path, e))
}
