use crate::error::{Error, Result};

/// Maximum-weight perfect matching on a square matrix, O(n³).
///
/// Returns `assign` with row `r` matched to column `assign[r]`.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let wmax = weights
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let cost = |i: usize, j: usize| wmax - weights[i][j];

    // Shortest augmenting paths with row/column potentials; 1-based with a
    // virtual column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Permutation `π` of cluster ids maximizing `#{i : π(pred_i) = truth_i}`.
///
/// `π[c]` is the true class matched to predicted cluster `c`.
pub fn hungarian_map(truth: &[usize], pred: &[usize], k: usize) -> Result<Vec<usize>> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!(
            "{} true labels vs {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if let Some(&bad) = truth.iter().chain(pred).find(|&&c| c >= k) {
        return Err(Error::Range(format!("label {bad} not below {k}")));
    }
    let mut counts = vec![vec![0.0; k]; k];
    for (&t, &p) in truth.iter().zip(pred) {
        counts[p][t] += 1.0;
    }
    Ok(max_weight_assignment(&counts))
}

/// Rewrites true classes into predicted-cluster ids through `π`, giving the
/// hard target that best agrees with the predictions.
pub fn map_truth_to_pred(truth: &[usize], pi: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; pi.len()];
    for (c, &t) in pi.iter().enumerate() {
        inv[t] = c;
    }
    truth.iter().map(|&t| inv[t]).collect()
}
