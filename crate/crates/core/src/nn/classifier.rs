//! Dense classifier: softmax regression or an MLP with tanh hidden layers.
//!
//! Parameters are stored layer by layer, each layer as a row-major
//! `out × in` weight block followed by `out` biases.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::param::ParamVector;
use super::tensor::{argmax, ImageShape, LabeledBatch, Probabilities};
use crate::error::{Error, Result};

/// Images per rayon task when evaluating large batches.
const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    input: ImageShape,
    hidden: Vec<usize>,
    num_classes: usize,
}

impl ClassifierSpec {
    pub fn new(input: ImageShape, hidden: Vec<usize>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::config(format!(
                "classifier needs at least 2 classes, got {num_classes}"
            )));
        }
        if input.pixels() == 0 {
            return Err(Error::config("classifier input dimensions must be positive"));
        }
        if hidden.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        Ok(Self {
            input,
            hidden,
            num_classes,
        })
    }

    pub fn softmax_regression(input: ImageShape, num_classes: usize) -> Result<Self> {
        Self::new(input, Vec::new(), num_classes)
    }

    pub fn input(&self) -> ImageShape {
        self.input
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// `[input, hidden..., classes]`
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input.pixels());
        dims.extend_from_slice(&self.hidden);
        dims.push(self.num_classes);
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Xavier-uniform weights, zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut values = Vec::with_capacity(self.param_count());
        for w in self.layer_dims().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            values.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ParamVector::new(values)
    }

    pub(crate) fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dim(format!(
                "classifier expects {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_images(&self, images: &[f64]) -> Result<usize> {
        let p = self.input.pixels();
        if !images.len().is_multiple_of(p) {
            return Err(Error::dim(format!(
                "image buffer of {} values is not a multiple of {p} pixels",
                images.len()
            )));
        }
        Ok(images.len() / p)
    }
}

/// Borrowed view of a classifier with precomputed layer offsets.
pub(crate) struct Net<'a> {
    params: &'a [f64],
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

/// Per-sample scratch space reused across `Net` calls.
pub(crate) struct Scratch {
    /// Output of every layer; the last entry holds the logits.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    probs: Vec<f64>,
}

impl<'a> Net<'a> {
    pub(crate) fn new(spec: &ClassifierSpec, params: &'a ParamVector) -> Result<Self> {
        spec.check_params(params)?;
        let dims = spec.layer_dims();
        let mut offsets = Vec::with_capacity(dims.len() - 1);
        let mut off = 0;
        for w in dims.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        Ok(Self {
            params: params.as_slice(),
            dims,
            offsets,
        })
    }

    fn layers(&self) -> usize {
        self.offsets.len()
    }

    pub(crate) fn classes(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub(crate) fn scratch(&self) -> Scratch {
        let widest = *self.dims.iter().max().unwrap();
        Scratch {
            acts: self.dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
            delta: vec![0.0; widest],
            delta_prev: vec![0.0; widest],
            probs: vec![0.0; self.classes()],
        }
    }

    /// Fills the activations and the softmax probabilities in `s.probs`.
    /// Returns log-sum-exp of the logits.
    pub(crate) fn forward(&self, x: &[f64], s: &mut Scratch) -> f64 {
        let last = self.layers() - 1;
        for k in 0..self.layers() {
            let (n_in, n_out) = (self.dims[k], self.dims[k + 1]);
            let w = &self.params[self.offsets[k]..self.offsets[k] + n_in * n_out];
            let b = &self.params[self.offsets[k] + n_in * n_out..self.offsets[k] + n_in * n_out + n_out];
            let (before, rest) = s.acts.split_at_mut(k);
            let input: &[f64] = if k == 0 { x } else { &before[k - 1] };
            let out = &mut rest[0];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = b[o] + dot(row, input);
                out[o] = if k == last { z } else { z.tanh() };
            }
        }
        let logits = &s.acts[last];
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        for (p, z) in s.probs.iter_mut().zip(logits) {
            *p = (z - lse).exp();
        }
        lse
    }

    /// Cross-entropy `-Σ q log p` of the last forward pass against `target`.
    pub(crate) fn soft_loss(&self, s: &Scratch, lse: f64, target: &[f64]) -> f64 {
        let logits = &s.acts[self.layers() - 1];
        target
            .iter()
            .zip(logits)
            .filter(|(q, _)| **q > 0.0)
            .map(|(q, z)| -q * (z - lse))
            .sum()
    }

    /// Back-propagate `dL/dlogits = scale · (p − q)` from the last forward
    /// pass. Parameter gradients accumulate into `grad`; the input gradient is
    /// written into `dx`.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        s: &mut Scratch,
        target: &[f64],
        scale: f64,
        mut grad: Option<&mut [f64]>,
        dx: Option<&mut [f64]>,
    ) {
        let last = self.layers() - 1;
        let classes = self.classes();
        for ((d, p), t) in s.delta[..classes].iter_mut().zip(&s.probs).zip(target) {
            *d = scale * (p - t);
        }
        let mut dx = dx;
        for k in (0..self.layers()).rev() {
            let (n_in, n_out) = (self.dims[k], self.dims[k + 1]);
            let w_off = self.offsets[k];
            let w = &self.params[w_off..w_off + n_in * n_out];
            let input: &[f64] = if k == 0 { x } else { &s.acts[k - 1] };
            if let Some(g) = grad.as_deref_mut() {
                let (gw, gb) = g[w_off..w_off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for o in 0..n_out {
                    let d = s.delta[o];
                    if d != 0.0 {
                        axpy(d, input, &mut gw[o * n_in..(o + 1) * n_in]);
                    }
                    gb[o] += d;
                }
            }
            let need_prev = k > 0 || dx.is_some();
            if !need_prev {
                break;
            }
            let prev = &mut s.delta_prev[..n_in];
            prev.fill(0.0);
            for o in 0..n_out {
                let d = s.delta[o];
                if d != 0.0 {
                    axpy(d, &w[o * n_in..(o + 1) * n_in], prev);
                }
            }
            if k > 0 {
                for (p, a) in prev.iter_mut().zip(&s.acts[k - 1]) {
                    *p *= 1.0 - a * a;
                }
                std::mem::swap(&mut s.delta, &mut s.delta_prev);
            } else if let Some(d) = dx.take() {
                d.copy_from_slice(prev);
            }
        }
        debug_assert!(last < self.layers());
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn numerical(params: &ParamVector, context: &str) -> Error {
    Error::Numerical {
        context: context.to_string(),
        param_index: params.first_non_finite(),
    }
}

/// Per-class probabilities for every image in `images`.
pub fn forward(params: &ParamVector, spec: &ClassifierSpec, images: &[f64]) -> Result<Probabilities> {
    let net = Net::new(spec, params)?;
    spec.check_images(images)?;
    let pixels = spec.input().pixels();
    let classes = spec.num_classes();
    let data: Vec<f64> = images
        .par_chunks(pixels * EVAL_CHUNK)
        .flat_map_iter(|chunk| {
            let mut s = net.scratch();
            let mut out = Vec::with_capacity(chunk.len() / pixels * classes);
            for x in chunk.chunks_exact(pixels) {
                net.forward(x, &mut s);
                out.extend_from_slice(&s.probs);
            }
            out
        })
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(numerical(params, "forward pass"));
    }
    Ok(Probabilities::from_raw(classes, data))
}

/// Argmax class of every image.
pub fn predict(params: &ParamVector, spec: &ClassifierSpec, images: &[f64]) -> Result<Vec<usize>> {
    Ok(forward(params, spec, images)?.iter_rows().map(argmax).collect())
}

/// Fraction of `batch` classified correctly; 0 for an empty batch.
pub fn accuracy(params: &ParamVector, spec: &ClassifierSpec, batch: &LabeledBatch) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let predicted = predict(params, spec, batch.images())?;
    let correct = predicted.iter().zip(batch.labels()).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / batch.len() as f64)
}

/// Mean cross-entropy over `batch` and its gradient with respect to the parameters.
pub fn loss_and_grad(
    params: &ParamVector,
    spec: &ClassifierSpec,
    batch: &LabeledBatch,
) -> Result<(f64, ParamVector)> {
    let all: Vec<usize> = (0..batch.len()).collect();
    let mut grad = vec![0.0; params.len()];
    let loss = minibatch_loss_and_grad(params, spec, batch, &all, &mut grad)?;
    Ok((loss, ParamVector::new(grad)))
}

/// Mean cross-entropy over `batch[indices]`; its gradient overwrites `grad`.
pub(crate) fn minibatch_loss_and_grad(
    params: &ParamVector,
    spec: &ClassifierSpec,
    batch: &LabeledBatch,
    indices: &[usize],
    grad: &mut [f64],
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::invalid("loss_and_grad needs a non-empty batch"));
    }
    if batch.shape() != spec.input() {
        return Err(Error::dim("batch image shape does not match the classifier input"));
    }
    let net = Net::new(spec, params)?;
    let mut s = net.scratch();
    grad.fill(0.0);
    let mut target = vec![0.0; spec.num_classes()];
    let scale = 1.0 / indices.len() as f64;
    let mut loss = 0.0;
    for &i in indices {
        let label = batch.labels()[i];
        if label >= spec.num_classes() {
            return Err(Error::invalid(format!("label {label} out of range")));
        }
        let x = batch.image(i);
        target.fill(0.0);
        target[label] = 1.0;
        let lse = net.forward(x, &mut s);
        loss += net.soft_loss(&s, lse, &target);
        net.backward(x, &mut s, &target, scale, Some(grad), None);
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(numerical(params, "cross-entropy loss"));
    }
    if let Some(i) = grad.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            context: "parameter gradient".into(),
            param_index: params.first_non_finite().or(Some(i)),
        });
    }
    Ok(loss)
}

pub(crate) fn check_simplex(target: &[f64], classes: usize) -> Result<()> {
    if target.len() != classes {
        return Err(Error::dim(format!(
            "target distribution has {} entries, expected {classes}",
            target.len()
        )));
    }
    let sum: f64 = target.iter().sum();
    if target.iter().any(|&q| !q.is_finite() || q < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("target distribution is not a probability simplex"));
    }
    Ok(())
}

/// Cross-entropy of one image against `target` and its gradient with respect
/// to the image, with the classifier weights held fixed.
pub fn input_loss_and_grad(
    params: &ParamVector,
    spec: &ClassifierSpec,
    image: &[f64],
    target: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let net = Net::new(spec, params)?;
    if image.len() != spec.input().pixels() {
        return Err(Error::dim(format!(
            "image has {} values, expected {}",
            image.len(),
            spec.input().pixels()
        )));
    }
    check_simplex(target, spec.num_classes())?;
    let mut s = net.scratch();
    let lse = net.forward(image, &mut s);
    let loss = net.soft_loss(&s, lse, target);
    let mut dx = vec![0.0; image.len()];
    net.backward(image, &mut s, target, 1.0, None, Some(&mut dx));
    if !loss.is_finite() || dx.iter().any(|v| !v.is_finite()) {
        return Err(numerical(params, "input gradient"));
    }
    Ok((loss, dx))
}

pub fn input_grad(
    params: &ParamVector,
    spec: &ClassifierSpec,
    image: &[f64],
    target: &[f64],
) -> Result<Vec<f64>> {
    input_loss_and_grad(params, spec, image, target).map(|(_, g)| g)
}
