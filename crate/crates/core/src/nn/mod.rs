//! Numerical core: parameter vectors, the classifier family, the DFA-R filter
//! layer, the DFA-G generator and plain SGD.
//!
//! All gradients are written out by hand; `tests/gradcheck.rs` verifies each
//! of them against central finite differences.

mod classifier;
mod filter;
mod generator;
mod param;
mod tensor;

pub use classifier::{accuracy, forward, input_grad, input_loss_and_grad, loss_and_grad, predict, ClassifierSpec};
pub use filter::{filter_backward, filter_forward, filter_loss_and_grad, FilterEval, FilterLayerSpec};
pub use generator::{
    gaussian_noise, generator_backward, generator_forward, generator_loss_and_grad, Activation, GeneratorSpec,
};
pub use param::{ParamVector, CHECKPOINT_MAGIC};
pub use tensor::{argmax, ImageShape, LabeledBatch, Probabilities};

pub(crate) use classifier::minibatch_loss_and_grad;

use crate::error::{Error, Result};

/// One plain gradient step: `params − lr · grad`. No momentum, no decay.
pub fn sgd_step(params: &ParamVector, grad: &ParamVector, lr: f64) -> Result<ParamVector> {
    let mut out = params.clone();
    sgd_step_in_place(&mut out, grad, lr)?;
    Ok(out)
}

pub fn sgd_step_in_place(params: &mut ParamVector, grad: &ParamVector, lr: f64) -> Result<()> {
    if params.len() != grad.len() {
        return Err(Error::dim(format!(
            "gradient length {} does not match parameter length {}",
            grad.len(),
            params.len()
        )));
    }
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::invalid(format!("learning rate must be finite and non-negative, got {lr}")));
    }
    for (p, g) in params.as_mut_slice().iter_mut().zip(grad.as_slice()) {
        *p -= lr * g;
    }
    Ok(())
}
