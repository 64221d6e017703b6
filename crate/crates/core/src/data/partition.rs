use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Disjoint assignment of training indices to clients.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// `assignment[i]` holds client `i`'s indices, sorted ascending.
    pub assignment: Vec<Vec<usize>>,
    /// Dirichlet concentration; `None` for the i.i.d. partition.
    pub beta: Option<f64>,
}

impl Partition {
    pub fn clients(&self) -> usize {
        self.assignment.len()
    }

    pub fn indices(&self, client: usize) -> &[usize] {
        &self.assignment[client]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.assignment.iter().map(Vec::len).collect()
    }

    /// Per-client class counts.
    pub fn class_histograms(&self, labels: &[usize], num_classes: usize) -> Vec<Vec<usize>> {
        self.assignment
            .iter()
            .map(|idx| {
                let mut h = vec![0; num_classes];
                for &i in idx {
                    h[labels[i]] += 1;
                }
                h
            })
            .collect()
    }

    /// Mean Shannon entropy (nats) of the non-empty clients' class distributions.
    pub fn mean_class_entropy(&self, labels: &[usize], num_classes: usize) -> f64 {
        let hists = self.class_histograms(labels, num_classes);
        let entropies: Vec<f64> = hists
            .iter()
            .filter_map(|h| {
                let n: usize = h.iter().sum();
                (n > 0).then(|| {
                    h.iter()
                        .filter(|&&c| c > 0)
                        .map(|&c| {
                            let p = c as f64 / n as f64;
                            -p * p.ln()
                        })
                        .sum()
                })
            })
            .collect();
        if entropies.is_empty() {
            0.0
        } else {
            entropies.iter().sum::<f64>() / entropies.len() as f64
        }
    }
}

fn indices_by_class(labels: &[usize], num_classes: usize, rng: &mut SimRng) -> Result<Vec<Vec<usize>>> {
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class
            .get_mut(l)
            .ok_or_else(|| Error::invalid(format!("label {l} outside [0, {num_classes})")))?
            .push(i);
    }
    for pool in &mut by_class {
        pool.shuffle(rng);
    }
    Ok(by_class)
}

/// Round `shares` (summing to 1) to integer counts summing to `total`:
/// floors first, the remainder goes to the largest fractional parts, ties to
/// the lower index.
fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = shares.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Per class, draw client proportions from `Dirichlet(β, …, β)` and deal that
/// class's (shuffled) indices out accordingly.
pub fn dirichlet_partition(
    labels: &[usize],
    num_classes: usize,
    clients: usize,
    beta: f64,
    rng: &mut SimRng,
) -> Result<Partition> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::config(format!("Dirichlet beta must be positive and finite, got {beta}")));
    }
    if clients == 0 {
        return Err(Error::config("partition needs at least one client"));
    }
    let gamma = Gamma::new(beta, 1.0).map_err(|e| Error::config(format!("Dirichlet beta {beta}: {e}")))?;
    let by_class = indices_by_class(labels, num_classes, rng)?;
    let mut assignment = vec![Vec::new(); clients];
    for pool in &by_class {
        let mut draws: Vec<f64> = (0..clients).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            // All draws underflowed: the Dirichlet limit is a point mass.
            draws.iter_mut().for_each(|d| *d = 0.0);
            let winner = rng.random_range(0..clients);
            draws[winner] = 1.0;
        } else {
            draws.iter_mut().for_each(|d| *d /= sum);
        }
        let mut start = 0;
        for (client, count) in largest_remainder(&draws, pool.len()).into_iter().enumerate() {
            assignment[client].extend_from_slice(&pool[start..start + count]);
            start += count;
        }
    }
    for idx in &mut assignment {
        idx.sort_unstable();
    }
    Ok(Partition {
        assignment,
        beta: Some(beta),
    })
}

/// Deal each class's shuffled indices round-robin so every client receives
/// per-class counts within one of each other.
pub fn iid_partition(labels: &[usize], num_classes: usize, clients: usize, rng: &mut SimRng) -> Result<Partition> {
    if clients == 0 {
        return Err(Error::config("partition needs at least one client"));
    }
    let by_class = indices_by_class(labels, num_classes, rng)?;
    let mut assignment = vec![Vec::new(); clients];
    let mut next = 0;
    for pool in &by_class {
        for &i in pool {
            assignment[next % clients].push(i);
            next += 1;
        }
    }
    for idx in &mut assignment {
        idx.sort_unstable();
    }
    Ok(Partition { assignment, beta: None })
}
