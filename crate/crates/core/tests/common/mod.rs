#![allow(dead_code)]

pub mod oracles;

use fpsim_core::nn::{
    filter_forward, forward, generator_forward, Activation, ClassifierSpec, FilterLayerSpec, GeneratorSpec,
    ImageShape, LabeledBatch, ParamVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;
/// Denominator floor for the relative error of near-zero gradient entries.
pub const REL_FLOOR: f64 = 1e-6;

/// Central finite differences of `f` at `x`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

/// Cross-entropy computed only from `forward` probabilities; independent of
/// the back-propagation code under test.
pub fn ce_from_probs(params: &[f64], spec: &ClassifierSpec, images: &[f64], targets: &[Vec<f64>]) -> f64 {
    let probs = forward(&ParamVector::new(params.to_vec()), spec, images).unwrap();
    let n = probs.rows();
    probs
        .iter_rows()
        .zip(targets)
        .map(|(p, q)| -q.iter().zip(p).filter(|(q, _)| **q > 0.0).map(|(q, p)| q * p.ln()).sum::<f64>())
        .sum::<f64>()
        / n as f64
}

pub fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    v
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Classifier specs exercised by the gradient checks.
pub fn classifier_case(seed: u64) -> ClassifierSpec {
    let hidden = match seed % 3 {
        0 => vec![],
        1 => vec![5],
        _ => vec![4, 3],
    };
    ClassifierSpec::new(ImageShape::square(4, 1), hidden, 3).unwrap()
}

pub fn random_params(spec: &ClassifierSpec, r: &mut ChaCha8Rng) -> ParamVector {
    ParamVector::new((0..spec.param_count()).map(|_| r.random_range(-1.0..1.0)).collect())
}

pub fn random_batch(spec: &ClassifierSpec, n: usize, r: &mut ChaCha8Rng) -> LabeledBatch {
    let p = spec.input().pixels();
    let images = (0..n * p).map(|_| r.random::<f64>()).collect();
    let labels = (0..n).map(|_| r.random_range(0..spec.num_classes())).collect();
    LabeledBatch::new(spec.input(), images, labels).unwrap()
}

pub fn random_simplex(classes: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..classes).map(|_| r.random::<f64>() + 0.05).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

pub fn filter_case(seed: u64) -> FilterLayerSpec {
    FilterLayerSpec::new(3, 1, (seed % 2) as usize, 4, 1).unwrap()
}

pub fn generator_case() -> GeneratorSpec {
    GeneratorSpec::new(3, 4, ImageShape::square(4, 1), Activation::Tanh).unwrap()
}

/// Loss of the composed filter → classifier chain via forward passes only.
pub fn filter_chain_loss(
    filter: &[f64],
    fspec: &FilterLayerSpec,
    cls: &ParamVector,
    cspec: &ClassifierSpec,
    dummy: &[f64],
    target: &[f64],
) -> f64 {
    let b = filter_forward(&ParamVector::new(filter.to_vec()), fspec, dummy).unwrap();
    ce_from_probs(cls.as_slice(), cspec, &b, &[target.to_vec()])
}

pub fn generator_chain_loss(
    theta: &[f64],
    gspec: &GeneratorSpec,
    cls: &ParamVector,
    cspec: &ClassifierSpec,
    noise: &[f64],
    label: usize,
) -> f64 {
    let images = generator_forward(&ParamVector::new(theta.to_vec()), gspec, noise).unwrap();
    let n = images.len() / gspec.output().pixels();
    let targets = vec![one_hot(label, cspec.num_classes()); n];
    ce_from_probs(cls.as_slice(), cspec, &images, &targets)
}
