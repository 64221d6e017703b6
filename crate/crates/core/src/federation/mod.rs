//! The server loop: client selection, benign local training, aggregation and
//! per-round bookkeeping.

mod runner;

pub use runner::{load_dataset, run_experiment, Experiment, RunOptions, RunOutput, DEFAULT_FASHION_DIR};

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{minibatch_loss_and_grad, ClassifierSpec, LabeledBatch, ParamVector};

/// What every participant sees at the start of a round.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    pub round: usize,
    /// w(t).
    pub global: &'a ParamVector,
    /// w(t−1); equals w(t) in round 0.
    pub prev_global: &'a ParamVector,
    pub selected: &'a [usize],
}

/// A submitted local model together with its claimed sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub params: ParamVector,
    pub n_samples: usize,
}

/// Sample-count-weighted average of the updates. Summation runs in client id
/// order, so the result does not depend on the order of `updates`.
pub fn fedavg(updates: &[ClientUpdate]) -> Result<ParamVector> {
    let first = updates
        .first()
        .ok_or_else(|| Error::Aggregation("fedavg over an empty update list".into()))?;
    let dim = first.params.len();
    if let Some(u) = updates.iter().find(|u| u.params.len() != dim) {
        return Err(Error::dim(format!(
            "client {} submitted {} parameters, expected {dim}",
            u.client_id,
            u.params.len()
        )));
    }
    let total: usize = updates.iter().map(|u| u.n_samples).sum();
    if total == 0 {
        return Err(Error::Aggregation("fedavg with zero total sample count".into()));
    }
    let mut order: Vec<&ClientUpdate> = updates.iter().collect();
    order.sort_by_key(|u| u.client_id);
    let mut out = vec![0.0; dim];
    for u in order {
        let w = u.n_samples as f64 / total as f64;
        for (o, v) in out.iter_mut().zip(u.params.as_slice()) {
            *o += w * v;
        }
    }
    Ok(ParamVector::new(out))
}

/// `k` distinct ids drawn uniformly without replacement from `candidates`,
/// returned in ascending order.
pub fn select_clients<R: Rng + ?Sized>(candidates: &[usize], k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k > candidates.len() {
        return Err(Error::config(format!(
            "cannot select {k} clients from {} candidates",
            candidates.len()
        )));
    }
    let mut picked: Vec<usize> = index::sample(rng, candidates.len(), k).into_iter().map(|i| candidates[i]).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Local training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTraining {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

/// `epochs` full passes of shuffled mini-batch SGD starting from `global`.
/// Returns the update and the mean mini-batch loss of the last epoch (NaN
/// when no step was taken).
pub fn local_train<R: Rng + ?Sized>(
    client_id: usize,
    global: &ParamVector,
    spec: &ClassifierSpec,
    data: &LabeledBatch,
    opts: LocalTraining,
    rng: &mut R,
) -> Result<(ClientUpdate, f64)> {
    if data.is_empty() {
        return Err(Error::invalid(format!("client {client_id} has no training data")));
    }
    if opts.batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    if !(opts.lr >= 0.0 && opts.lr.is_finite()) {
        return Err(Error::config(format!("learning rate must be finite and non-negative, got {}", opts.lr)));
    }
    let mut params = global.clone();
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut last_loss = f64::NAN;
    for _ in 0..opts.epochs {
        order.shuffle(rng);
        let mut sum = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(opts.batch_size) {
            sum += minibatch_loss_and_grad(&params, spec, data, chunk, &mut grad)?;
            steps += 1;
            for (p, g) in params.as_mut_slice().iter_mut().zip(&grad) {
                *p -= opts.lr * g;
            }
        }
        last_loss = sum / steps as f64;
    }
    params.ensure_finite("local training")?;
    Ok((
        ClientUpdate {
            client_id,
            params,
            n_samples: data.len(),
        },
        last_loss,
    ))
}
