//! Brute-force reference implementations shared by the integration and
//! acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rgae::graph::AttributedGraph;
use rgae::harness::{planted_partition, prepare_input, star_count};
use rgae::linalg::DenseMatrix;
use rgae::model::{pretrain, train_joint, Arch, GaeModel, TrainConfig, TrainOutcome};
use rgae::operators::{CentroidNodes, EdgeTag};

/// Reliability filter written the slow way: sort a copy of the row.
pub fn xi_brute(p: &DenseMatrix, alpha1: f64, alpha2: f64) -> Vec<usize> {
    (0..p.rows())
        .filter(|&i| {
            let mut row = p.row(i).to_vec();
            row.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let l1 = row[0];
            let l2 = row.iter().copied().find(|&x| x < l1).unwrap_or(l1);
            l1 >= alpha1 && l1 - l2 >= alpha2
        })
        .collect()
}

/// Graph rewrite on a dense adjacency, one statement per step of the
/// published pseudocode. Writes go to row `i` only and the result is
/// symmetrized afterwards; a node that is its own centroid is skipped.
pub struct RewriteSim {
    pub edges: Vec<(usize, usize)>,
    pub tags: Vec<EdgeTag>,
    pub deleted: Vec<(usize, usize)>,
}

pub fn upsilon_sim(
    n: usize,
    edges: &[(usize, usize)],
    labels: &[usize],
    omega: &[usize],
    pi: &CentroidNodes,
) -> RewriteSim {
    let mut a = vec![vec![0u8; n]; n];
    for &(u, v) in edges {
        a[u][v] = 1;
        a[v][u] = 1;
    }
    let orig = a.clone();
    let in_omega = |x: usize| omega.contains(&x);
    for &i in omega {
        let k1 = labels[i];
        if let Some(j) = pi.pi[k1] {
            let k2 = labels[j];
            if j != i && orig[i][j] == 0 && k1 == k2 {
                a[i][j] = 1;
            }
        }
        for l in 0..n {
            if orig[i][l] == 1 {
                let k2 = labels[l];
                if in_omega(l) && k1 != k2 {
                    a[i][l] = 0;
                }
            }
        }
    }
    let mut out = RewriteSim {
        edges: Vec::new(),
        tags: Vec::new(),
        deleted: Vec::new(),
    };
    for u in 0..n {
        for v in u + 1..n {
            // Deletions are mutual, additions one-sided.
            let removed = orig[u][v] == 1 && (a[u][v] == 0 || a[v][u] == 0);
            let present = if orig[u][v] == 1 {
                !removed
            } else {
                a[u][v] == 1 || a[v][u] == 1
            };
            if removed {
                out.deleted.push((u, v));
            }
            if present {
                out.edges.push((u, v));
                out.tags.push(if orig[u][v] == 1 {
                    EdgeTag::Original
                } else {
                    EdgeTag::Added
                });
            }
        }
    }
    out
}

/// Best accuracy over all `k!` relabelings.
pub fn acc_by_enumeration(truth: &[usize], pred: &[usize], k: usize) -> f64 {
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permute(&mut perm, 0, &mut |p| {
        let hits = truth.iter().zip(pred).filter(|(&t, &c)| p[c] == t).count();
        best = best.max(hits);
    });
    best as f64 / truth.len() as f64
}

fn permute(p: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == p.len() {
        f(p);
        return;
    }
    for i in at..p.len() {
        p.swap(at, i);
        permute(p, at + 1, f);
        p.swap(at, i);
    }
}

/// Random row-stochastic matrix; some rows are exact ties or one-hot.
pub fn random_stochastic(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DenseMatrix {
    DenseMatrix::from_rows(
        &(0..n)
            .map(|_| {
                let mode = rng.random_range(0..6);
                let mut row: Vec<f64> = match mode {
                    0 => vec![1.0; k],
                    1 => {
                        let mut r = vec![0.0; k];
                        r[rng.random_range(0..k)] = 1.0;
                        r
                    }
                    _ => (0..k).map(|_| rng.random::<f64>().powi(3)).collect(),
                };
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= s);
                row
            })
            .collect::<Vec<_>>(),
    )
    .unwrap()
}

pub struct SyntheticRun {
    pub graph: AttributedGraph,
    pub outcome: TrainOutcome,
    pub stars: usize,
}

/// Two-block planted partition trained end to end with both operators.
pub fn synthetic_rethink_dgae(seed: u64) -> SyntheticRun {
    let graph = planted_partition(&[10, 10], 0.8, 0.05, seed).unwrap();
    let input = prepare_input(&graph, true).unwrap();
    let cfg = TrainConfig {
        seed,
        rethink: true,
        pretrain_epochs: 100,
        train_epochs: 200,
        m1: 5,
        m2: 5,
        diagnostics_stride: 0,
        ..TrainConfig::default()
    };
    let mut model = GaeModel::with_default_dims(Arch::Dgae, graph.n_features(), seed);
    pretrain(&mut model, &input, &graph.adjacency(), &cfg).unwrap();
    let outcome = train_joint(&mut model, &input, &graph, &cfg).unwrap();
    let stars = match &outcome.final_centroids {
        Some(c) => star_count(
            &outcome.final_graph,
            &outcome.final_omega.omega,
            &outcome.labels,
            c,
        ),
        None => 0,
    };
    SyntheticRun {
        graph,
        outcome,
        stars,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
