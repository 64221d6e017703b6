use rayon::prelude::*;

use super::{check_dims, trimmed_mean, DefenseVerdict};
use crate::error::{Error, Result};
use crate::federation::{fedavg, ClientUpdate};
use crate::nn::ParamVector;

pub(super) fn check_krum(n: usize, f: usize) -> Result<()> {
    if n < f + 3 {
        return Err(Error::config(format!("krum: n = {n} updates need n >= f + 3 with f = {f}")));
    }
    Ok(())
}

pub(super) fn check_bulyan(n: usize, f: usize) -> Result<()> {
    if n < 4 * f + 3 {
        return Err(Error::config(format!("bulyan: n = {n} updates need n >= 4f + 3 with f = {f}")));
    }
    Ok(())
}

/// Symmetric matrix of squared L2 distances, row-major.
fn distance_matrix(params: &[&ParamVector]) -> Result<Vec<f64>> {
    check_dims(params)?;
    let n = params.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| params[i].sq_distance(params[j])).collect())
        .collect();
    let mut d = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    Ok(d)
}

/// Krum score of each pool member against the other pool members: the sum of
/// its `neighbours` smallest squared distances.
fn pool_scores(d: &[f64], n: usize, pool: &[usize], neighbours: usize) -> Vec<f64> {
    pool.iter()
        .map(|&i| {
            let mut row: Vec<f64> = pool.iter().filter(|&&j| j != i).map(|&j| d[i * n + j]).collect();
            row.sort_unstable_by(f64::total_cmp);
            row[..neighbours.min(row.len())].iter().sum()
        })
        .collect()
}

/// Sum of squared distances from each update to its `n − f − 2` nearest
/// other updates.
pub fn krum_scores(params: &[&ParamVector], f: usize) -> Result<Vec<f64>> {
    let n = params.len();
    check_krum(n, f)?;
    let d = distance_matrix(params)?;
    let pool: Vec<usize> = (0..n).collect();
    Ok(pool_scores(&d, n, &pool, n - f - 2))
}

/// Positions of `updates` ordered by ascending score, ties to the lower client id.
fn rank(updates: &[ClientUpdate], positions: &[usize], scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .total_cmp(&scores[b])
            .then(updates[positions[a]].client_id.cmp(&updates[positions[b]].client_id))
    });
    order.into_iter().map(|k| positions[k]).collect()
}

/// Admit the `m` lowest-scoring updates and fedavg them; `m = 1` is Krum.
pub fn mkrum(updates: &[ClientUpdate], f: usize, m: usize) -> Result<DefenseVerdict> {
    let n = updates.len();
    if m == 0 || m > n {
        return Err(Error::config(format!("mkrum: m = {m} must lie in [1, {n}]")));
    }
    let params: Vec<&ParamVector> = updates.iter().map(|u| &u.params).collect();
    let scores = krum_scores(&params, f)?;
    let all: Vec<usize> = (0..n).collect();
    let chosen: Vec<usize> = rank(updates, &all, &scores).into_iter().take(m).collect();
    let admitted_updates: Vec<ClientUpdate> = chosen.iter().map(|&i| updates[i].clone()).collect();
    let aggregate = fedavg(&admitted_updates)?;
    let admitted = chosen.iter().map(|&i| updates[i].client_id).collect();
    Ok(DefenseVerdict::from_admitted(updates, admitted, scores, aggregate))
}

/// Repeated Krum picks `n − 2f` updates, moving each winner out of the pool;
/// the aggregate is their coordinate-wise trimmed mean with trim `f`.
///
/// The neighbour count `pool − f − 2` is clamped to at least 1 once the pool
/// shrinks below `f + 3`.
pub fn bulyan(updates: &[ClientUpdate], f: usize) -> Result<DefenseVerdict> {
    let n = updates.len();
    check_bulyan(n, f)?;
    let params: Vec<&ParamVector> = updates.iter().map(|u| &u.params).collect();
    let d = distance_matrix(&params)?;
    let mut pool: Vec<usize> = (0..n).collect();
    let first_scores = pool_scores(&d, n, &pool, n - f - 2);
    let theta = n - 2 * f;
    let mut selected = Vec::with_capacity(theta);
    for _ in 0..theta {
        let neighbours = pool.len().saturating_sub(f + 2).max(1);
        let scores = pool_scores(&d, n, &pool, neighbours);
        let winner = rank(updates, &pool, &scores)[0];
        pool.retain(|&i| i != winner);
        selected.push(winner);
    }
    let chosen: Vec<&ParamVector> = selected.iter().map(|&i| &updates[i].params).collect();
    let aggregate = trimmed_mean(&chosen, f)?;
    let admitted = selected.iter().map(|&i| updates[i].client_id).collect();
    Ok(DefenseVerdict::from_admitted(updates, admitted, first_scores, aggregate))
}
