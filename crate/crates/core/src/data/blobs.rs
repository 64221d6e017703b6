use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::nn::{ImageShape, LabeledBatch};
use crate::rng::{stream, Stream};

/// Per-pixel standard deviation of the noise around each class template.
pub const BLOB_NOISE: f64 = 0.3;

/// Synthetic `b × b` grayscale classification data: every class has a fixed
/// random template, samples are the template plus Gaussian noise clamped to
/// `[0, 1]`. Both splits hold `per_class` samples of each class, labels cycle
/// `0, 1, …, L−1`.
pub fn make_blobs(classes: usize, per_class: usize, side: usize, seed: u64) -> Dataset {
    make_blobs_with_noise(classes, per_class, side, BLOB_NOISE, seed)
}

pub fn make_blobs_with_noise(classes: usize, per_class: usize, side: usize, noise: f64, seed: u64) -> Dataset {
    assert!(classes >= 2, "blobs need at least two classes");
    let shape = ImageShape::square(side, 1);
    let pixels = shape.pixels();
    let mut rng = stream(seed, Stream::Init, &[0xB10B]);
    let templates: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..pixels).map(|_| rng.random::<f64>()).collect())
        .collect();
    let normal = Normal::new(0.0, noise).expect("noise must be finite and non-negative");
    let split = |tag: u64| {
        let mut rng = stream(seed, Stream::Init, &[0xB10B, tag]);
        let n = classes * per_class;
        let mut images = Vec::with_capacity(n * pixels);
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        for &l in &labels {
            images.extend(templates[l].iter().map(|t| (t + normal.sample(&mut rng)).clamp(0.0, 1.0)));
        }
        LabeledBatch::new(shape, images, labels).unwrap()
    };
    let train = split(1);
    let test = split(2);
    Dataset::new(format!("blobs-{classes}x{side}"), train, test, classes).expect("blobs are well-formed")
}
