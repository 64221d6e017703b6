//! Brute-force reference implementations of the aggregation rules.

/// Peel one minimum and one maximum per step.
pub fn peel(mut v: Vec<f64>, steps: usize) -> Vec<f64> {
    for _ in 0..steps {
        let lo = (0..v.len()).fold(0, |b, i| if v[i] < v[b] { i } else { b });
        v.remove(lo);
        let hi = (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        v.remove(hi);
    }
    v
}

pub fn oracle_trimmed(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    (0..rows[0].len())
        .map(|c| {
            let kept = peel(rows.iter().map(|r| r[c]).collect(), k);
            kept.iter().sum::<f64>() / kept.len() as f64
        })
        .collect()
}

pub fn oracle_median(rows: &[Vec<f64>]) -> Vec<f64> {
    (0..rows[0].len())
        .map(|c| {
            let n = rows.len();
            let kept = peel(rows.iter().map(|r| r[c]).collect(), (n - 1) / 2);
            kept.iter().sum::<f64>() / kept.len() as f64
        })
        .collect()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn oracle_krum_score(rows: &[Vec<f64>], pool: &[usize], i: usize, neighbours: usize) -> f64 {
    let mut d: Vec<f64> = pool.iter().filter(|&&j| j != i).map(|&j| sq_dist(&rows[i], &rows[j])).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.iter().take(neighbours).sum()
}

/// Repeated argmin over (score, id).
pub fn oracle_argmin(rows: &[Vec<f64>], pool: &[usize], neighbours: usize) -> usize {
    let mut best = pool[0];
    let mut best_score = oracle_krum_score(rows, pool, best, neighbours);
    for &i in &pool[1..] {
        let s = oracle_krum_score(rows, pool, i, neighbours);
        if s < best_score || (s == best_score && i < best) {
            best = i;
            best_score = s;
        }
    }
    best
}

pub fn oracle_mkrum(rows: &[Vec<f64>], f: usize, m: usize) -> Vec<usize> {
    let n = rows.len();
    let all: Vec<usize> = (0..n).collect();
    let mut scored: Vec<(f64, usize)> = all.iter().map(|&i| (oracle_krum_score(rows, &all, i, n - f - 2), i)).collect();
    let mut admitted = Vec::new();
    for _ in 0..m {
        let k = (0..scored.len())
            .fold(0, |b, k| if scored[k].0 < scored[b].0 || (scored[k].0 == scored[b].0 && scored[k].1 < scored[b].1) { k } else { b });
        admitted.push(scored.remove(k).1);
    }
    admitted.sort_unstable();
    admitted
}

pub fn oracle_bulyan(rows: &[Vec<f64>], f: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..rows.len()).collect();
    let mut chosen = Vec::new();
    for _ in 0..rows.len() - 2 * f {
        let neighbours = pool.len().saturating_sub(f + 2).max(1);
        let w = oracle_argmin(rows, &pool, neighbours);
        pool.retain(|&i| i != w);
        chosen.push(w);
    }
    chosen.sort_unstable();
    chosen
}

/// Trimmed mean by a full sort of each column, summing the kept values in
/// ascending order; bit-identical to any sort-then-sum implementation.
pub fn sorted_trimmed(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    (0..rows[0].len())
        .map(|c| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let kept = &col[k..col.len() - k];
            let mut sum = 0.0;
            for v in kept {
                sum += v;
            }
            sum / kept.len() as f64
        })
        .collect()
}

pub fn sorted_median(rows: &[Vec<f64>]) -> Vec<f64> {
    (0..rows[0].len())
        .map(|c| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = col.len();
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect()
}
