//! The DFA-R filter layer: one 2D convolution mapping an `a × a` dummy image
//! to a `b × b` image the classifier can consume.
//!
//! Input and output sizes are tied by `a = b·(St + 1) − 2P + J`. The layer
//! slides its `J × J` kernel with step `St + 1` over the zero-padded input and
//! emits exactly `b × b` outputs; with that relation every window lies inside
//! the padded input and the trailing `St + 1` padded rows/columns go unused.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::classifier::{check_simplex, ClassifierSpec, Net};
use super::param::ParamVector;
use super::tensor::ImageShape;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterLayerSpec {
    kernel: usize,
    stride: usize,
    padding: usize,
    input_size: usize,
    output_size: usize,
    channels: usize,
}

impl FilterLayerSpec {
    /// Derives the input size from the output size.
    pub fn new(kernel: usize, stride: usize, padding: usize, output_size: usize, channels: usize) -> Result<Self> {
        let grown = output_size * (stride + 1) + kernel;
        if grown <= 2 * padding {
            return Err(Error::config(format!(
                "padding {padding} too large for kernel {kernel}, stride {stride}, output {output_size}"
            )));
        }
        Self::with_input_size(kernel, stride, padding, grown - 2 * padding, output_size, channels)
    }

    /// Validates an explicit `(a, b)` pair against the size relation.
    pub fn with_input_size(
        kernel: usize,
        stride: usize,
        padding: usize,
        input_size: usize,
        output_size: usize,
        channels: usize,
    ) -> Result<Self> {
        if kernel == 0 || output_size == 0 || channels == 0 {
            return Err(Error::config("filter kernel, output size and channels must be positive"));
        }
        if padding >= kernel {
            return Err(Error::config(format!(
                "filter padding {padding} must be smaller than kernel {kernel}"
            )));
        }
        let expected = (output_size * (stride + 1) + kernel) as i64 - 2 * padding as i64;
        if input_size as i64 != expected {
            return Err(Error::config(format!(
                "filter size constraint violated: a = {input_size}, but b·(St+1) − 2P + J = {expected}"
            )));
        }
        Ok(Self {
            kernel,
            stride,
            padding,
            input_size,
            output_size,
            channels,
        })
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn input_shape(&self) -> ImageShape {
        ImageShape::square(self.input_size, self.channels)
    }

    pub fn output_shape(&self) -> ImageShape {
        ImageShape::square(self.output_size, self.channels)
    }

    /// `channels² · J²` kernel weights followed by `channels` biases.
    pub fn param_count(&self) -> usize {
        self.channels * self.channels * self.kernel * self.kernel + self.channels
    }

    fn kernel_len(&self) -> usize {
        self.channels * self.channels * self.kernel * self.kernel
    }

    /// Uniform kernel init scaled by fan-in, biases zero.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let fan_in = (self.channels * self.kernel * self.kernel) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let mut values: Vec<f64> = (0..self.kernel_len()).map(|_| rng.random_range(-bound..bound)).collect();
        values.extend(std::iter::repeat_n(0.0, self.channels));
        ParamVector::new(values)
    }

    fn check(&self, params: &ParamVector, image: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dim(format!(
                "filter expects {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        if image.len() != self.input_shape().pixels() {
            return Err(Error::dim(format!(
                "dummy image has {} values, expected {}",
                image.len(),
                self.input_shape().pixels()
            )));
        }
        Ok(())
    }

    /// Calls `f(out_index, kernel_index, input_index)` for every tap that
    /// lands inside the unpadded input.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (a, b, j, c) = (self.input_size as i64, self.output_size, self.kernel, self.channels);
        let step = (self.stride + 1) as i64;
        let pad = self.padding as i64;
        for oc in 0..c {
            for oy in 0..b {
                for ox in 0..b {
                    let out = (oc * b + oy) * b + ox;
                    for ic in 0..c {
                        for u in 0..j {
                            let iy = oy as i64 * step + u as i64 - pad;
                            if iy < 0 || iy >= a {
                                continue;
                            }
                            for v in 0..j {
                                let ix = ox as i64 * step + v as i64 - pad;
                                if ix < 0 || ix >= a {
                                    continue;
                                }
                                let k = ((oc * c + ic) * j + u) * j + v;
                                let inp = (ic as i64 * a * a + iy * a + ix) as usize;
                                f(out, k, inp);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Apply the filter layer to a dummy image `A`, producing image `B`.
pub fn filter_forward(params: &ParamVector, spec: &FilterLayerSpec, image: &[f64]) -> Result<Vec<f64>> {
    spec.check(params, image)?;
    let w = params.as_slice();
    let (kernel, bias) = w.split_at(spec.kernel_len());
    let per_channel = spec.output_size * spec.output_size;
    let mut out: Vec<f64> = (0..spec.output_shape().pixels()).map(|i| bias[i / per_channel]).collect();
    spec.for_each_tap(|o, k, i| out[o] += kernel[k] * image[i]);
    Ok(out)
}

/// Gradient of a scalar loss with respect to the filter parameters, given the
/// upstream gradient `d_out = dL/dB`.
pub fn filter_backward(
    params: &ParamVector,
    spec: &FilterLayerSpec,
    image: &[f64],
    d_out: &[f64],
) -> Result<ParamVector> {
    spec.check(params, image)?;
    if d_out.len() != spec.output_shape().pixels() {
        return Err(Error::dim("upstream gradient does not match the filter output"));
    }
    let mut grad = vec![0.0; spec.param_count()];
    let (gk, gb) = grad.split_at_mut(spec.kernel_len());
    let per_channel = spec.output_size * spec.output_size;
    for (o, d) in d_out.iter().enumerate() {
        gb[o / per_channel] += d;
    }
    spec.for_each_tap(|o, k, i| gk[k] += d_out[o] * image[i]);
    Ok(ParamVector::new(grad))
}

/// Result of one filter → classifier → cross-entropy evaluation.
#[derive(Debug, Clone)]
pub struct FilterEval {
    pub loss: f64,
    pub image: Vec<f64>,
    pub grad: ParamVector,
}

/// Cross-entropy between the frozen classifier's prediction on `filter(A)`
/// and `target`, with its gradient with respect to the filter parameters.
pub fn filter_loss_and_grad(
    filter: &ParamVector,
    spec: &FilterLayerSpec,
    classifier: &ParamVector,
    classifier_spec: &ClassifierSpec,
    dummy: &[f64],
    target: &[f64],
) -> Result<FilterEval> {
    if spec.output_shape() != classifier_spec.input() {
        return Err(Error::dim("filter output shape differs from the classifier input"));
    }
    check_simplex(target, classifier_spec.num_classes())?;
    let image = filter_forward(filter, spec, dummy)?;
    let net = Net::new(classifier_spec, classifier)?;
    let mut s = net.scratch();
    let lse = net.forward(&image, &mut s);
    let loss = net.soft_loss(&s, lse, target);
    let mut d_image = vec![0.0; image.len()];
    net.backward(&image, &mut s, target, 1.0, None, Some(&mut d_image));
    let grad = filter_backward(filter, spec, dummy, &d_image)?;
    if !loss.is_finite() || grad.first_non_finite().is_some() {
        return Err(Error::Numerical {
            context: "filter layer gradient".into(),
            param_index: filter.first_non_finite(),
        });
    }
    Ok(FilterEval { loss, image, grad })
}
