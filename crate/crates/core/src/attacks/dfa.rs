//! Data-free synthesis (filter layer and generator) and regularized malicious
//! training. Nothing here sees benign updates.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    filter_forward, filter_loss_and_grad, forward, generator_forward, generator_loss_and_grad, minibatch_loss_and_grad,
    ClassifierSpec, FilterLayerSpec, GeneratorSpec, ImageShape, LabeledBatch, ParamVector,
};

/// Loss above which the synthesis parameters are considered diverged.
pub const DIVERGENCE_LOSS: f64 = 1e3;

/// Synthetic images, all carrying the poison label.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSet {
    pub shape: ImageShape,
    pub images: Vec<f64>,
    pub label: usize,
}

impl SynthSet {
    pub fn len(&self) -> usize {
        self.images.len() / self.shape.pixels()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn to_batch(&self) -> LabeledBatch {
        LabeledBatch::new(self.shape, self.images.clone(), vec![self.label; self.len()]).expect("synthetic set is well-formed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    /// |S|.
    pub count: usize,
    /// E.
    pub epochs: usize,
    pub lr: f64,
}

/// Before/after diagnostics of one synthesis call.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SynthReport {
    /// DFA-R: mean CE against the uniform target. DFA-G: mean probability of the poison label.
    pub before: f64,
    pub after: f64,
    pub reinitializations: usize,
}

fn uniform_target(classes: usize) -> Vec<f64> {
    vec![1.0 / classes as f64; classes]
}

fn soft_ce(probs: &[f64], target: &[f64]) -> f64 {
    probs
        .iter()
        .zip(target)
        .filter(|(_, q)| **q > 0.0)
        .map(|(p, q)| -q * p.max(f64::MIN_POSITIVE).ln())
        .sum()
}

fn clamp_unit(image: &mut [f64]) {
    image.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

/// Mean CE of `global` on each image against the uniform distribution.
fn uniform_ce(global: &ParamVector, spec: &ClassifierSpec, images: &[f64]) -> Result<f64> {
    let probs = forward(global, spec, images)?;
    let target = uniform_target(spec.num_classes());
    Ok(probs.iter_rows().map(|r| soft_ce(r, &target)).sum::<f64>() / probs.rows() as f64)
}

/// DFA-R: for each of `|S|` fresh uniform dummy images, run `E` gradient
/// steps on the filter so that the frozen global model's output on
/// `filter(A)` approaches the uniform distribution, then emit `filter(A)`
/// clamped to `[0, 1]`. The filter persists across images (and, through the
/// caller, across rounds).
#[allow(clippy::too_many_arguments)]
pub fn dfa_r_synthesize<R: Rng + ?Sized>(
    filter: &mut ParamVector,
    fspec: &FilterLayerSpec,
    global: &ParamVector,
    cspec: &ClassifierSpec,
    opts: SynthOptions,
    label: usize,
    rng: &mut R,
) -> Result<(SynthSet, SynthReport)> {
    if fspec.output_shape() != cspec.input() {
        return Err(Error::dim("filter output shape differs from the classifier input"));
    }
    let target = uniform_target(cspec.num_classes());
    let a_pixels = fspec.input_shape().pixels();
    let mut images = Vec::with_capacity(opts.count * cspec.input().pixels());
    let mut before = Vec::with_capacity(opts.count * cspec.input().pixels());
    let mut report = SynthReport::default();
    for _ in 0..opts.count {
        let dummy: Vec<f64> = (0..a_pixels).map(|_| rng.random::<f64>()).collect();
        let mut start = filter_forward(filter, fspec, &dummy)?;
        clamp_unit(&mut start);
        before.extend(start);
        for _ in 0..opts.epochs {
            let step = filter_loss_and_grad(filter, fspec, global, cspec, &dummy, &target);
            match step {
                Ok(eval) if eval.loss <= DIVERGENCE_LOSS => {
                    for (w, g) in filter.as_mut_slice().iter_mut().zip(eval.grad.as_slice()) {
                        *w -= opts.lr * g;
                    }
                }
                Ok(_) | Err(Error::Numerical { .. }) => {
                    *filter = fspec.init_params(rng);
                    report.reinitializations += 1;
                }
                Err(e) => return Err(e),
            }
        }
        if filter.first_non_finite().is_some() {
            *filter = fspec.init_params(rng);
            report.reinitializations += 1;
        }
        let mut image = filter_forward(filter, fspec, &dummy)?;
        clamp_unit(&mut image);
        images.extend(image);
    }
    if report.reinitializations > 0 {
        log::warn!("dfa_r: filter diverged, reinitialized {} time(s)", report.reinitializations);
    }
    report.before = uniform_ce(global, cspec, &before)?;
    report.after = uniform_ce(global, cspec, &images)?;
    Ok((
        SynthSet {
            shape: cspec.input(),
            images,
            label,
        },
        report,
    ))
}

fn label_probability(global: &ParamVector, spec: &ClassifierSpec, images: &[f64], label: usize) -> Result<f64> {
    let probs = forward(global, spec, images)?;
    Ok(probs.iter_rows().map(|r| r[label]).sum::<f64>() / probs.rows() as f64)
}

/// DFA-G: `E` gradient-ascent steps on `θ` maximizing the frozen global
/// model's cross-entropy on `G(Z)` against the poison label; emits `G(Z)`.
#[allow(clippy::too_many_arguments)]
pub fn dfa_g_synthesize<R: Rng + ?Sized>(
    theta: &mut ParamVector,
    gspec: &GeneratorSpec,
    global: &ParamVector,
    cspec: &ClassifierSpec,
    noise: &[f64],
    opts: SynthOptions,
    label: usize,
    rng: &mut R,
) -> Result<(SynthSet, SynthReport)> {
    let mut report = SynthReport {
        before: label_probability(global, cspec, &generator_forward(theta, gspec, noise)?, label)?,
        ..SynthReport::default()
    };
    for _ in 0..opts.epochs {
        match generator_loss_and_grad(theta, gspec, global, cspec, noise, label) {
            Ok((loss, grad)) if loss <= DIVERGENCE_LOSS => {
                for (w, g) in theta.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                    *w += opts.lr * g;
                }
            }
            Ok(_) | Err(Error::Numerical { .. }) => {
                *theta = gspec.init_params(rng);
                report.reinitializations += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if theta.first_non_finite().is_some() {
        *theta = gspec.init_params(rng);
        report.reinitializations += 1;
    }
    if report.reinitializations > 0 {
        log::warn!("dfa_g: generator diverged, reinitialized {} time(s)", report.reinitializations);
    }
    let images = generator_forward(theta, gspec, noise)?;
    report.after = label_probability(global, cspec, &images, label)?;
    Ok((
        SynthSet {
            shape: gspec.output(),
            images,
            label,
        },
        report,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialTraining {
    pub lambda_reg: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialOutcome {
    pub params: ParamVector,
    /// Mean mini-batch CE of the last epoch; NaN when no step was taken.
    pub ce_loss: f64,
    /// `‖w − w(t)‖ − ‖w(t) − w(t−1)‖` at the returned parameters.
    pub distance_term: f64,
}

/// Train from `global` on the synthetic set, minimizing `CE + λ·L_d` with
/// `L_d = ‖w − w(t)‖ − ‖w(t) − w(t−1)‖`. The second term is constant in `w`;
/// the gradient of the first is `(w − w(t)) / ‖w − w(t)‖`, taken as zero at
/// `w = w(t)`.
pub fn adversarial_train<R: Rng + ?Sized>(
    global: &ParamVector,
    prev_global: &ParamVector,
    spec: &ClassifierSpec,
    synth: &SynthSet,
    opts: AdversarialTraining,
    rng: &mut R,
) -> Result<AdversarialOutcome> {
    if synth.is_empty() {
        return Err(Error::invalid("adversarial training needs a non-empty synthetic set"));
    }
    if opts.batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let batch = synth.to_batch();
    let mut w = global.clone();
    let mut grad = vec![0.0; w.len()];
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut ce_loss = f64::NAN;
    for _ in 0..opts.epochs {
        order.shuffle(rng);
        let mut sum = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(opts.batch_size) {
            sum += minibatch_loss_and_grad(&w, spec, &batch, chunk, &mut grad)?;
            steps += 1;
            // Proximal step for the penalty: its gradient has constant length
            // λ, so a plain step of lr·λ could jump past w(t). Shrinking
            // towards w(t) by at most the current distance keeps
            // ‖w − w(t)‖ non-increasing in λ.
            for (wi, gi) in w.as_mut_slice().iter_mut().zip(&grad) {
                *wi -= opts.lr * gi;
            }
            let dist = w.distance(global);
            if dist > 0.0 && opts.lambda_reg > 0.0 {
                let keep = (1.0 - opts.lr * opts.lambda_reg / dist).max(0.0);
                for (wi, ci) in w.as_mut_slice().iter_mut().zip(global.as_slice()) {
                    *wi = ci + keep * (*wi - ci);
                }
            }
        }
        ce_loss = sum / steps as f64;
    }
    w.ensure_finite("adversarial training")?;
    let distance_term = w.distance(global) - global.distance(prev_global);
    Ok(AdversarialOutcome {
        params: w,
        ce_loss,
        distance_term,
    })
}
