use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Image dimensions (height × width × channels), channel-major storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn square(side: usize, channels: usize) -> Self {
        Self {
            height: side,
            width: side,
            channels,
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width * self.channels
    }
}

/// A batch of images in `[0, 1]` with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    shape: ImageShape,
    images: Vec<f64>,
    labels: Vec<usize>,
}

impl LabeledBatch {
    pub fn new(shape: ImageShape, images: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let pixels = shape.pixels();
        if pixels == 0 {
            return Err(Error::dim("image shape has zero pixels"));
        }
        if images.len() != labels.len() * pixels {
            return Err(Error::dim(format!(
                "{} labels need {} pixel values, got {}",
                labels.len(),
                labels.len() * pixels,
                images.len()
            )));
        }
        Ok(Self {
            shape,
            images,
            labels,
        })
    }

    pub fn empty(shape: ImageShape) -> Self {
        Self {
            shape,
            images: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &[f64] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let p = self.shape.pixels();
        &self.images[i * p..(i + 1) * p]
    }

    /// Copy out the samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> LabeledBatch {
        let p = self.shape.pixels();
        let mut images = Vec::with_capacity(indices.len() * p);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        LabeledBatch {
            shape: self.shape,
            images,
            labels,
        }
    }

    pub fn class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Row-major matrix of per-class probabilities, one row per input image.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    classes: usize,
    data: Vec<f64>,
}

impl Probabilities {
    pub(crate) fn from_raw(classes: usize, data: Vec<f64>) -> Self {
        debug_assert!(classes > 0 && data.len().is_multiple_of(classes));
        Self { classes, data }
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.classes)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
