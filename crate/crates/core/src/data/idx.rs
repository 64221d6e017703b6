//! IDX binary format (big-endian): images `0x00000803, count, rows, cols,
//! bytes…`; labels `0x00000801, count, bytes…`.

use std::fs;
use std::path::Path;

use crate::error::{Error, ParseError, Result};
use crate::nn::{ImageShape, LabeledBatch};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn u32(&mut self) -> Result<u32, ParseError> {
        let chunk = self.take(4)?;
        Ok(u32::from_be_bytes(chunk.try_into().unwrap()))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ParseError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(ParseError::Truncated {
                offset: self.bytes.len(),
                needed: n - available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

fn magic(c: &mut Cursor<'_>, expected: u32) -> Result<(), ParseError> {
    let found = c.u32()?;
    if found != expected {
        return Err(ParseError::BadMagic { found, expected });
    }
    Ok(())
}

/// Parse an IDX image file into `(shape, count, raw bytes)`.
pub fn parse_images(bytes: &[u8]) -> Result<(ImageShape, usize, &[u8]), ParseError> {
    let mut c = Cursor { bytes, pos: 0 };
    magic(&mut c, IMAGES_MAGIC)?;
    let count = c.u32()? as usize;
    let rows = c.u32()? as usize;
    let cols = c.u32()? as usize;
    if rows == 0 || cols == 0 {
        return Err(ParseError::Header {
            offset: 8,
            reason: format!("image dimensions {rows}×{cols} must be positive"),
        });
    }
    let data = c.take(count * rows * cols)?;
    Ok((
        ImageShape {
            height: rows,
            width: cols,
            channels: 1,
        },
        count,
        data,
    ))
}

pub fn parse_labels(bytes: &[u8]) -> Result<&[u8], ParseError> {
    let mut c = Cursor { bytes, pos: 0 };
    magic(&mut c, LABELS_MAGIC)?;
    let count = c.u32()? as usize;
    c.take(count)
}

/// Combine parsed image and label buffers; pixel bytes are scaled by 1/255.
pub fn decode(images: &[u8], labels: &[u8]) -> Result<LabeledBatch, ParseError> {
    let (shape, count, pixels) = parse_images(images)?;
    let labels = parse_labels(labels)?;
    if labels.len() != count {
        return Err(ParseError::CountMismatch {
            offset: 4,
            images: count,
            labels: labels.len(),
        });
    }
    let images = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    let labels = labels.iter().map(|&l| l as usize).collect();
    Ok(LabeledBatch::new(shape, images, labels).expect("shape checked while parsing"))
}

/// Load an image/label IDX file pair.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledBatch> {
    let images = fs::read(images_path)?;
    let labels = fs::read(labels_path)?;
    let at = |path: &Path| {
        let path = path.to_path_buf();
        move |kind| Error::Parse { path, kind }
    };
    parse_images(&images).map_err(at(images_path))?;
    parse_labels(&labels).map_err(at(labels_path))?;
    // Both headers parsed; only the count check remains.
    decode(&images, &labels).map_err(at(labels_path))
}

/// Encode a batch of 8-bit images and labels as IDX buffers.
pub fn encode(shape: ImageShape, pixels: &[u8], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut images = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, labels.len() as u32, shape.height as u32, shape.width as u32] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    images.extend_from_slice(pixels);
    let mut label_bytes = Vec::with_capacity(8 + labels.len());
    label_bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    label_bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    label_bytes.extend_from_slice(labels);
    (images, label_bytes)
}
