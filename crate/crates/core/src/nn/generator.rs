//! DFA-G generator: a two-layer dense network mapping Gaussian noise to
//! images, squashed into `[0, 1]` by a logistic output.
//!
//! Layout: `W1 (hidden × noise)`, `b1`, `W2 (pixels × hidden)`, `b2`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::classifier::{axpy, dot, ClassifierSpec, Net};
use super::param::ParamVector;
use super::tensor::ImageShape;
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    noise_dim: usize,
    hidden: usize,
    output: ImageShape,
    activation: Activation,
}

impl GeneratorSpec {
    pub fn new(noise_dim: usize, hidden: usize, output: ImageShape, activation: Activation) -> Result<Self> {
        if noise_dim == 0 || hidden == 0 || output.pixels() == 0 {
            return Err(Error::config("generator dimensions must be positive"));
        }
        Ok(Self {
            noise_dim,
            hidden,
            output,
            activation,
        })
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn output(&self) -> ImageShape {
        self.output
    }

    pub fn param_count(&self) -> usize {
        let p = self.output.pixels();
        self.hidden * self.noise_dim + self.hidden + p * self.hidden + p
    }

    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let p = self.output.pixels();
        let b1 = (6.0 / (self.noise_dim + self.hidden) as f64).sqrt();
        let b2 = (6.0 / (self.hidden + p) as f64).sqrt();
        let mut values = Vec::with_capacity(self.param_count());
        values.extend((0..self.hidden * self.noise_dim).map(|_| rng.random_range(-b1..b1)));
        values.extend(std::iter::repeat_n(0.0, self.hidden));
        values.extend((0..p * self.hidden).map(|_| rng.random_range(-b2..b2)));
        values.extend(std::iter::repeat_n(0.0, p));
        ParamVector::new(values)
    }

    fn split<'a>(&self, theta: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (w1, rest) = theta.split_at(self.hidden * self.noise_dim);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.output.pixels() * self.hidden);
        (w1, b1, w2, b2)
    }

    fn check(&self, theta: &ParamVector, noise: &[f64]) -> Result<usize> {
        if theta.len() != self.param_count() {
            return Err(Error::dim(format!(
                "generator expects {} parameters, got {}",
                self.param_count(),
                theta.len()
            )));
        }
        if !noise.len().is_multiple_of(self.noise_dim) {
            return Err(Error::dim(format!(
                "noise buffer of {} values is not a multiple of {}",
                noise.len(),
                self.noise_dim
            )));
        }
        Ok(noise.len() / self.noise_dim)
    }

    /// Hidden activations and output images for one noise vector.
    fn forward_one(&self, theta: &[f64], z: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        let (w1, b1, w2, b2) = self.split(theta);
        for h in 0..self.hidden {
            hidden[h] = self.activation.apply(b1[h] + dot(&w1[h * self.noise_dim..(h + 1) * self.noise_dim], z));
        }
        for (o, y) in out.iter_mut().enumerate() {
            let zo = b2[o] + dot(&w2[o * self.hidden..(o + 1) * self.hidden], hidden);
            *y = sigmoid(zo);
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `count` standard-normal noise vectors drawn from a stream seeded by `seed`.
pub fn gaussian_noise(seed: u64, count: usize, dim: usize) -> Vec<f64> {
    use rand::SeedableRng;
    let mut rng = SimRng::seed_from_u64(seed);
    (0..count * dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Images `S = G(Z)` for a batch of noise vectors.
pub fn generator_forward(theta: &ParamVector, spec: &GeneratorSpec, noise: &[f64]) -> Result<Vec<f64>> {
    let n = spec.check(theta, noise)?;
    let p = spec.output.pixels();
    let mut images = vec![0.0; n * p];
    let mut hidden = vec![0.0; spec.hidden];
    for (z, out) in noise.chunks_exact(spec.noise_dim).zip(images.chunks_exact_mut(p)) {
        spec.forward_one(theta.as_slice(), z, &mut hidden, out);
    }
    Ok(images)
}

/// Gradient of a scalar loss with respect to `θ`, given `d_images = dL/dS`.
pub fn generator_backward(
    theta: &ParamVector,
    spec: &GeneratorSpec,
    noise: &[f64],
    d_images: &[f64],
) -> Result<ParamVector> {
    let n = spec.check(theta, noise)?;
    let p = spec.output.pixels();
    if d_images.len() != n * p {
        return Err(Error::dim("upstream gradient does not match the generator output"));
    }
    let (_, _, w2, _) = spec.split(theta.as_slice());
    let mut grad = vec![0.0; spec.param_count()];
    let mut hidden = vec![0.0; spec.hidden];
    let mut out = vec![0.0; p];
    let mut d_hidden = vec![0.0; spec.hidden];
    let o_w1 = 0;
    let o_b1 = spec.hidden * spec.noise_dim;
    let o_w2 = o_b1 + spec.hidden;
    let o_b2 = o_w2 + p * spec.hidden;
    for (z, d_out) in noise.chunks_exact(spec.noise_dim).zip(d_images.chunks_exact(p)) {
        spec.forward_one(theta.as_slice(), z, &mut hidden, &mut out);
        d_hidden.fill(0.0);
        for o in 0..p {
            let dz = d_out[o] * out[o] * (1.0 - out[o]);
            if dz == 0.0 {
                continue;
            }
            grad[o_b2 + o] += dz;
            axpy(dz, &hidden, &mut grad[o_w2 + o * spec.hidden..o_w2 + (o + 1) * spec.hidden]);
            axpy(dz, &w2[o * spec.hidden..(o + 1) * spec.hidden], &mut d_hidden);
        }
        for h in 0..spec.hidden {
            let dz = d_hidden[h] * spec.activation.derivative(hidden[h]);
            if dz == 0.0 {
                continue;
            }
            grad[o_b1 + h] += dz;
            axpy(dz, z, &mut grad[o_w1 + h * spec.noise_dim..o_w1 + (h + 1) * spec.noise_dim]);
        }
    }
    Ok(ParamVector::new(grad))
}

/// Mean cross-entropy of the frozen classifier's predictions on `G(Z)`
/// against the fixed label, and its gradient with respect to `θ`.
pub fn generator_loss_and_grad(
    theta: &ParamVector,
    spec: &GeneratorSpec,
    classifier: &ParamVector,
    classifier_spec: &ClassifierSpec,
    noise: &[f64],
    label: usize,
) -> Result<(f64, ParamVector)> {
    if spec.output != classifier_spec.input() {
        return Err(Error::dim("generator output shape differs from the classifier input"));
    }
    if label >= classifier_spec.num_classes() {
        return Err(Error::invalid(format!("label {label} out of range")));
    }
    let images = generator_forward(theta, spec, noise)?;
    let n = images.len() / spec.output.pixels();
    if n == 0 {
        return Err(Error::invalid("generator needs at least one noise vector"));
    }
    let scale = 1.0 / n as f64;
    let net = Net::new(classifier_spec, classifier)?;
    let mut s = net.scratch();
    let mut target = vec![0.0; classifier_spec.num_classes()];
    target[label] = 1.0;
    let mut d_images = vec![0.0; images.len()];
    let mut loss = 0.0;
    let p = spec.output.pixels();
    for (x, dx) in images.chunks_exact(p).zip(d_images.chunks_exact_mut(p)) {
        let lse = net.forward(x, &mut s);
        loss += net.soft_loss(&s, lse, &target);
        net.backward(x, &mut s, &target, scale, None, Some(dx));
    }
    let loss = loss * scale;
    let grad = generator_backward(theta, spec, noise, &d_images)?;
    if !loss.is_finite() || grad.first_non_finite().is_some() {
        return Err(Error::Numerical {
            context: "generator gradient".into(),
            param_index: theta.first_non_finite(),
        });
    }
    Ok((loss, grad))
}
