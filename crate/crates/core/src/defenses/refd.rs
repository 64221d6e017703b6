use rayon::prelude::*;

use super::DefenseVerdict;
use crate::error::{Error, Result};
use crate::federation::{fedavg, ClientUpdate};
use crate::nn::{argmax, forward, ClassifierSpec, LabeledBatch, ParamVector, Probabilities};

/// Balance and confidence of one model on the reference set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefdScore {
    pub balance: f64,
    pub confidence: f64,
}

fn reference_probs(params: &ParamVector, spec: &ClassifierSpec, reference: &LabeledBatch) -> Result<Probabilities> {
    if reference.is_empty() {
        return Err(Error::config("refd needs a non-empty reference set"));
    }
    forward(params, spec, reference.images())
}

fn balance_of(probs: &Probabilities) -> f64 {
    let mut counts = vec![0usize; probs.classes()];
    for row in probs.iter_rows() {
        counts[argmax(row)] += 1;
    }
    if counts.iter().all(|&c| c == counts[0]) {
        return 1.0;
    }
    let l = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / l;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / l;
    1.0 / var.sqrt()
}

fn confidence_of(probs: &Probabilities) -> f64 {
    let total: f64 = probs
        .iter_rows()
        .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .sum();
    total / probs.rows() as f64
}

/// `1 / std` of the predicted-class histogram over the reference set
/// (population std), or 1 when the histogram is flat.
pub fn refd_balance(params: &ParamVector, spec: &ClassifierSpec, reference: &LabeledBatch) -> Result<f64> {
    Ok(balance_of(&reference_probs(params, spec, reference)?))
}

/// Mean over the reference set of the largest predicted probability.
pub fn refd_confidence(params: &ParamVector, spec: &ClassifierSpec, reference: &LabeledBatch) -> Result<f64> {
    Ok(confidence_of(&reference_probs(params, spec, reference)?))
}

/// Both values from a single pass over the reference set.
pub fn refd_score(params: &ParamVector, spec: &ClassifierSpec, reference: &LabeledBatch) -> Result<RefdScore> {
    let probs = reference_probs(params, spec, reference)?;
    Ok(RefdScore {
        balance: balance_of(&probs),
        confidence: confidence_of(&probs),
    })
}

/// `(1 + α²) · B·V / (α²·B + V)`.
pub fn d_score(balance: f64, confidence: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    (1.0 + a2) * balance * confidence / (a2 * balance + confidence)
}

/// Reject the `reject` updates with the lowest D-Score and fedavg the rest.
/// Among equal scores the higher client id is rejected first.
pub fn refd(
    updates: &[ClientUpdate],
    spec: &ClassifierSpec,
    reference: &LabeledBatch,
    alpha: f64,
    reject: usize,
) -> Result<DefenseVerdict> {
    let n = updates.len();
    if reject >= n {
        return Err(Error::config(format!("refd: X = {reject} must be below n = {n}")));
    }
    let scores: Vec<f64> = updates
        .par_iter()
        .map(|u| refd_score(&u.params, spec, reference).map(|s| d_score(s.balance, s.confidence, alpha)))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .total_cmp(&scores[b])
            .then(updates[b].client_id.cmp(&updates[a].client_id))
    });
    let kept: Vec<ClientUpdate> = order[reject..].iter().map(|&i| updates[i].clone()).collect();
    let aggregate = fedavg(&kept)?;
    let admitted = kept.iter().map(|u| u.client_id).collect();
    Ok(DefenseVerdict::from_admitted(updates, admitted, scores, aggregate))
}
