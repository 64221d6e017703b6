//! Dataset ingestion, synthetic blobs, client partitioning and the server's
//! reference set.

mod blobs;
mod idx;
mod partition;

use std::path::Path;

use rand::seq::index;

pub use blobs::{make_blobs, make_blobs_with_noise, BLOB_NOISE};
pub use idx::{decode as decode_idx, encode as encode_idx, load_idx, IMAGES_MAGIC, LABELS_MAGIC};
pub use partition::{dirichlet_partition, iid_partition, Partition};

use crate::error::{Error, Result};
use crate::nn::LabeledBatch;
use crate::rng::SimRng;

/// A train/test corpus over `num_classes` labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub train: LabeledBatch,
    pub test: LabeledBatch,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, train: LabeledBatch, test: LabeledBatch, num_classes: usize) -> Result<Self> {
        if train.is_empty() || test.is_empty() {
            return Err(Error::config("dataset splits must be non-empty"));
        }
        if train.shape() != test.shape() {
            return Err(Error::dim("train and test image shapes differ"));
        }
        if let Some(&l) = train.labels().iter().chain(test.labels()).find(|&&l| l >= num_classes) {
            return Err(Error::invalid(format!("label {l} outside [0, {num_classes})")));
        }
        Ok(Self {
            name: name.into(),
            train,
            test,
            num_classes,
        })
    }

    /// Keep a uniformly random `fraction` of the training split (at least one sample).
    pub fn subsample_train(self, fraction: f64, rng: &mut SimRng) -> Result<Self> {
        let train = subsample(&self.train, fraction, rng)?;
        Ok(Self { train, ..self })
    }

    pub fn subsample_test(self, fraction: f64, rng: &mut SimRng) -> Result<Self> {
        let test = subsample(&self.test, fraction, rng)?;
        Ok(Self { test, ..self })
    }
}

fn subsample(batch: &LabeledBatch, fraction: f64, rng: &mut SimRng) -> Result<LabeledBatch> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!("subsample fraction must lie in (0, 1], got {fraction}")));
    }
    if fraction == 1.0 {
        return Ok(batch.clone());
    }
    let keep = ((batch.len() as f64 * fraction).round() as usize).max(1);
    let mut picked = index::sample(rng, batch.len(), keep).into_vec();
    picked.sort_unstable();
    Ok(batch.select(&picked))
}

/// Standard file names of the Fashion-MNIST IDX distribution.
pub const FASHION_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

/// Load Fashion-MNIST (or any MNIST-layout corpus) from a directory holding
/// the four uncompressed IDX files.
pub fn load_fashion_mnist(dir: &Path) -> Result<Dataset> {
    let [ti, tl, vi, vl] = FASHION_FILES.map(|f| dir.join(f));
    let train = load_idx(&ti, &tl)?;
    let test = load_idx(&vi, &vl)?;
    Dataset::new("fashion-mnist", train, test, 10)
}

/// Class-balanced labeled data held by the server for RefD.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    pub batch: LabeledBatch,
}

/// Draw `size` test samples with per-class counts balanced within ±1.
pub fn make_reference_set(dataset: &Dataset, size: usize, rng: &mut SimRng) -> Result<ReferenceSet> {
    let classes = dataset.num_classes;
    if size == 0 {
        return Err(Error::config("reference set size must be positive"));
    }
    if dataset.test.len() < size {
        return Err(Error::config(format!(
            "reference set of {size} requested but the test split has {} samples",
            dataset.test.len()
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in dataset.test.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut picked = Vec::with_capacity(size);
    for (c, pool) in by_class.iter().enumerate() {
        let want = size / classes + usize::from(c < size % classes);
        if pool.len() < want {
            return Err(Error::config(format!(
                "reference set needs {want} samples of class {c}, test split has {}",
                pool.len()
            )));
        }
        picked.extend(index::sample(rng, pool.len(), want).into_iter().map(|k| pool[k]));
    }
    picked.sort_unstable();
    Ok(ReferenceSet {
        batch: dataset.test.select(&picked),
    })
}
