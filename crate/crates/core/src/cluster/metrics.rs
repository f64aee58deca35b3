use serde::{Deserialize, Serialize};

use super::hungarian::hungarian_map;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// External clustering scores in `[0, 1]` (ARI may dip below 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringScores {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    /// NMI was undefined (one side has a single cluster) and reported as 0.
    pub nmi_degenerate: bool,
}

pub fn evaluate_clustering(pred: &[usize], truth: &[usize], k: usize) -> Result<ClusteringScores> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} true labels",
            pred.len(),
            truth.len()
        )));
    }
    let n = pred.len();
    if n == 0 {
        return Err(Error::Data("cannot score an empty clustering".into()));
    }
    let k = k
        .max(pred.iter().max().map_or(0, |m| m + 1))
        .max(truth.iter().max().map_or(0, |m| m + 1));
    let pi = hungarian_map(truth, pred, k)?;
    let hits = pred.iter().zip(truth).filter(|(&p, &t)| pi[p] == t).count();
    let acc = hits as f64 / n as f64;

    let mut table = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        table[p][t] += 1;
    }
    let a: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let b: Vec<usize> = (0..k).map(|t| table.iter().map(|r| r[t]).sum()).collect();

    let nf = n as f64;
    let entropy = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / nf;
                -p * p.ln()
            })
            .sum()
    };
    let (hp, ht) = (entropy(&a), entropy(&b));
    let mut mi = 0.0;
    for p in 0..k {
        for t in 0..k {
            let c = table[p][t];
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (a[p] as f64 * b[t] as f64)).ln();
            }
        }
    }
    let nmi_degenerate = hp <= 0.0 || ht <= 0.0;
    let nmi = if nmi_degenerate {
        0.0
    } else {
        (mi / (hp * ht).sqrt()).clamp(0.0, 1.0)
    };

    let comb2 = |x: usize| (x as f64) * (x as f64 - 1.0) / 2.0;
    let index: f64 = table.iter().flatten().map(|&c| comb2(c)).sum();
    let sa: f64 = a.iter().map(|&c| comb2(c)).sum();
    let sb: f64 = b.iter().map(|&c| comb2(c)).sum();
    let expected = if n > 1 { sa * sb / comb2(n) } else { 0.0 };
    let max_index = 0.5 * (sa + sb);
    let ari = if max_index == expected {
        1.0
    } else {
        (index - expected) / (max_index - expected)
    };

    Ok(ClusteringScores {
        acc,
        nmi,
        ari,
        nmi_degenerate,
    })
}

pub fn cluster_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &c in labels {
        sizes[c] += 1;
    }
    sizes
}

/// Block graph with `a_ij = 1/|C_k|` for every pair (diagonal included) of
/// members of cluster `C_k`.
pub fn build_cluster_graph(labels: &[usize], k: usize) -> Result<SparseMatrix> {
    if let Some(&bad) = labels.iter().find(|&&c| c >= k) {
        return Err(Error::Range(format!("label {bad} not below {k}")));
    }
    let sizes = cluster_sizes(labels, k);
    let mut members = vec![Vec::new(); k];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    let n = labels.len();
    let mut trip = Vec::with_capacity(sizes.iter().map(|s| s * s).sum());
    for (i, &c) in labels.iter().enumerate() {
        let w = 1.0 / sizes[c] as f64;
        trip.extend(members[c].iter().map(|&j| (i, j, w)));
    }
    SparseMatrix::from_triplets(n, n, trip)
}
