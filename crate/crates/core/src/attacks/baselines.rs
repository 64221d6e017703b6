//! Omniscient baselines that read the round's benign updates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamVector;

/// Perturbation direction for Min-Max / Min-Sum, relative to the benign mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `−(mean − global) / ‖mean − global‖`.
    Unit,
    /// `−sign(mean − global)`.
    Sign,
    /// `−std` of the benign updates, coordinate-wise.
    Std,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceBound {
    /// Largest distance to any benign update ≤ largest benign pairwise distance.
    MinMax,
    /// Sum of squared distances ≤ the largest such sum of any benign update.
    MinSum,
}

pub const BINARY_SEARCH_STEPS: usize = 30;
pub const GAMMA_UPPER: f64 = 1e3;
pub const FANG_HALVINGS: usize = 20;

fn check(benign: &[&ParamVector], min: usize) -> Result<usize> {
    if benign.len() < min {
        return Err(Error::invalid(format!("need at least {min} benign updates, got {}", benign.len())));
    }
    let dim = benign[0].len();
    if benign.iter().any(|b| b.len() != dim) {
        return Err(Error::dim("benign updates have different parameter counts"));
    }
    Ok(dim)
}

/// Coordinate-wise mean and population standard deviation.
pub fn mean_and_std(benign: &[&ParamVector]) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = check(benign, 1)?;
    let n = benign.len() as f64;
    let mut mean = vec![0.0; dim];
    for b in benign {
        for (m, v) in mean.iter_mut().zip(b.as_slice()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for b in benign {
        for ((s, v), m) in var.iter_mut().zip(b.as_slice()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    Ok((mean, std))
}

/// `mean − z·std`; the plain mean with fewer than two benign updates.
pub fn lie_attack(benign: &[&ParamVector], z: f64) -> Result<ParamVector> {
    let (mean, std) = mean_and_std(benign)?;
    if benign.len() < 2 {
        return Ok(ParamVector::new(mean));
    }
    Ok(ParamVector::new(mean.iter().zip(&std).map(|(m, s)| m - z * s).collect()))
}

fn direction_vector(kind: Direction, mean: &[f64], std: &[f64], global: &ParamVector) -> Vec<f64> {
    let delta: Vec<f64> = mean.iter().zip(global.as_slice()).map(|(m, g)| m - g).collect();
    match kind {
        Direction::Unit => {
            let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            if norm > 0.0 {
                delta.iter().map(|d| -d / norm).collect()
            } else {
                vec![0.0; delta.len()]
            }
        }
        Direction::Sign => delta.iter().map(|d| -sign(*d)).collect(),
        Direction::Std => std.iter().map(|s| -s).collect(),
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Result of a Min-Max / Min-Sum search.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub params: ParamVector,
    pub gamma: f64,
}

/// `mean + γ·p` with the largest γ in `[0, GAMMA_UPPER]` (binary search)
/// keeping the malicious update within the benign spread.
pub fn minmax_attack(
    benign: &[&ParamVector],
    global: &ParamVector,
    direction: Direction,
    bound: DistanceBound,
) -> Result<Perturbed> {
    let dim = check(benign, 2)?;
    if global.len() != dim {
        return Err(Error::dim("global model and benign updates differ in length"));
    }
    let (mean, std) = mean_and_std(benign)?;
    let p = direction_vector(direction, &mean, &std, global);
    let rows: Vec<&[f64]> = benign.iter().map(|b| b.as_slice()).collect();
    let threshold = match bound {
        DistanceBound::MinMax => rows
            .iter()
            .flat_map(|a| rows.iter().map(move |b| sq(a, b)))
            .fold(0.0, f64::max),
        DistanceBound::MinSum => rows
            .iter()
            .map(|a| rows.iter().map(|b| sq(a, b)).sum::<f64>())
            .fold(0.0, f64::max),
    };
    let candidate = |gamma: f64| -> Vec<f64> { mean.iter().zip(&p).map(|(m, d)| m + gamma * d).collect() };
    let feasible = |gamma: f64| {
        let x = candidate(gamma);
        match bound {
            DistanceBound::MinMax => rows.iter().map(|b| sq(&x, b)).fold(0.0, f64::max) <= threshold,
            DistanceBound::MinSum => rows.iter().map(|b| sq(&x, b)).sum::<f64>() <= threshold,
        }
    };
    let gamma = if feasible(GAMMA_UPPER) {
        log::warn!("min-max search bracket exhausted; using gamma = {GAMMA_UPPER}");
        GAMMA_UPPER
    } else {
        let (mut lo, mut hi) = (0.0, GAMMA_UPPER);
        for _ in 0..BINARY_SEARCH_STEPS {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Ok(Perturbed {
        params: ParamVector::new(candidate(gamma)),
        gamma,
    })
}

/// `global − λ·sign(mean − global)`.
pub fn fang_with_lambda(mean: &[f64], global: &ParamVector, lambda: f64) -> ParamVector {
    ParamVector::new(
        global
            .as_slice()
            .iter()
            .zip(mean)
            .map(|(g, m)| g - lambda * sign(m - g))
            .collect(),
    )
}

/// Fang-style reversal with a stealth heuristic: starting at `lambda0`, halve
/// λ (at most `FANG_HALVINGS` times) while the malicious update would be the
/// unique farthest point from the benign mean.
pub fn fang_attack(benign: &[&ParamVector], global: &ParamVector, lambda0: f64) -> Result<ParamVector> {
    let dim = check(benign, 1)?;
    if global.len() != dim {
        return Err(Error::dim("global model and benign updates differ in length"));
    }
    let (mean, _) = mean_and_std(benign)?;
    let farthest_benign = benign.iter().map(|b| sq(b.as_slice(), &mean)).fold(0.0, f64::max);
    let mut lambda = lambda0;
    let mut malicious = fang_with_lambda(&mean, global, lambda);
    for _ in 0..FANG_HALVINGS {
        if sq(malicious.as_slice(), &mean) <= farthest_benign {
            break;
        }
        lambda *= 0.5;
        malicious = fang_with_lambda(&mean, global, lambda);
    }
    Ok(malicious)
}

/// Parameters drawn i.i.d. uniform on `[−1, 1]`.
pub fn random_weights_attack<R: Rng + ?Sized>(len: usize, rng: &mut R) -> ParamVector {
    ParamVector::new((0..len).map(|_| rng.random_range(-1.0..=1.0)).collect())
}
