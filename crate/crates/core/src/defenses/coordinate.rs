use rayon::prelude::*;

use super::check_dims;
use crate::error::{Error, Result};
use crate::nn::ParamVector;

const COORD_CHUNK: usize = 4096;

pub(super) fn check_trim(n: usize, k: usize) -> Result<()> {
    if 2 * k >= n {
        return Err(Error::config(format!("trimmed mean: 2k = {} must be below n = {n}", 2 * k)));
    }
    Ok(())
}

/// Apply `reduce` to the sorted values of every coordinate.
fn per_coordinate(params: &[&ParamVector], reduce: impl Fn(&[f64]) -> f64 + Sync) -> Result<ParamVector> {
    let dim = check_dims(params)?;
    let mut out = vec![0.0; dim];
    out.par_chunks_mut(COORD_CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut column = vec![0.0; params.len()];
        for (j, o) in chunk.iter_mut().enumerate() {
            let coord = c * COORD_CHUNK + j;
            for (v, p) in column.iter_mut().zip(params) {
                *v = p.as_slice()[coord];
            }
            column.sort_unstable_by(f64::total_cmp);
            *o = reduce(&column);
        }
    });
    Ok(ParamVector::new(out))
}

/// Per coordinate, drop the `k` smallest and `k` largest values and average
/// the rest.
pub fn trimmed_mean(params: &[&ParamVector], k: usize) -> Result<ParamVector> {
    check_trim(params.len(), k)?;
    per_coordinate(params, |sorted| {
        let kept = &sorted[k..sorted.len() - k];
        kept.iter().sum::<f64>() / kept.len() as f64
    })
}

/// Per-coordinate median; for an even count, the mean of the two middle values.
pub fn coordinate_median(params: &[&ParamVector]) -> Result<ParamVector> {
    per_coordinate(params, |sorted| {
        let n = sorted.len();
        if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        }
    })
}
