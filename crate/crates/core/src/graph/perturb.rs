use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::AttributedGraph;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Robustness perturbations of a graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "amount", rename_all = "snake_case")]
pub enum PerturbSpec {
    /// Connect `m` uniformly chosen unlinked pairs.
    AddRandomEdges(usize),
    /// Remove `m` uniformly chosen edges.
    DropRandomEdges(usize),
    /// Add i.i.d. `N(0, σ²)` noise to every feature entry.
    FeatureGaussianNoise(f64),
    /// Remove `m` uniformly chosen feature columns.
    DropFeatureColumns(usize),
}

impl fmt::Display for PerturbSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbSpec::AddRandomEdges(m) => write!(f, "add_edges:{m}"),
            PerturbSpec::DropRandomEdges(m) => write!(f, "drop_edges:{m}"),
            PerturbSpec::FeatureGaussianNoise(s) => write!(f, "feature_noise:{s}"),
            PerturbSpec::DropFeatureColumns(m) => write!(f, "drop_features:{m}"),
        }
    }
}

impl FromStr for PerturbSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, amount) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("perturbation `{s}` is not kind:amount")))?;
        let count = || {
            amount
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("perturbation `{s}`: {e}")))
        };
        Ok(match kind {
            "add_edges" | "add_random_edges" => PerturbSpec::AddRandomEdges(count()?),
            "drop_edges" | "drop_random_edges" => PerturbSpec::DropRandomEdges(count()?),
            "drop_features" | "drop_feature_columns" => PerturbSpec::DropFeatureColumns(count()?),
            "feature_noise" | "feature_gaussian_noise" => PerturbSpec::FeatureGaussianNoise(
                amount
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("perturbation `{s}`: {e}")))?,
            ),
            other => {
                return Err(Error::Config(format!(
                    "unknown perturbation kind `{other}`"
                )))
            }
        })
    }
}

/// Applies `spec` deterministically for a given `seed`.
pub fn perturb_graph(
    graph: &AttributedGraph,
    spec: PerturbSpec,
    seed: u64,
) -> Result<AttributedGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec {
        PerturbSpec::AddRandomEdges(m) => {
            let n = graph.n_nodes();
            let total_pairs = n * n.saturating_sub(1) / 2;
            let candidates = total_pairs - graph.n_edges();
            if m > candidates {
                return Err(Error::Range(format!(
                    "cannot add {m} edges: only {candidates} unlinked pairs"
                )));
            }
            let mut added = Vec::with_capacity(m);
            if m * 2 <= candidates {
                // Rejection sampling over unordered pairs is uniform without replacement.
                let mut seen = HashSet::with_capacity(m);
                while added.len() < m {
                    let u = rng.random_range(0..n);
                    let v = rng.random_range(0..n);
                    if u == v {
                        continue;
                    }
                    let e = (u.min(v), u.max(v));
                    if graph.has_edge(e.0, e.1) || !seen.insert(e) {
                        continue;
                    }
                    added.push(e);
                }
            } else {
                let mut pool = Vec::with_capacity(candidates);
                for u in 0..n {
                    for v in u + 1..n {
                        if !graph.has_edge(u, v) {
                            pool.push((u, v));
                        }
                    }
                }
                added.extend(
                    index::sample(&mut rng, pool.len(), m)
                        .into_iter()
                        .map(|i| pool[i]),
                );
            }
            graph.with_edges(graph.edges().iter().copied().chain(added))
        }
        PerturbSpec::DropRandomEdges(m) => {
            let e = graph.n_edges();
            if m > e {
                return Err(Error::Range(format!("cannot drop {m} of {e} edges")));
            }
            let mut drop = vec![false; e];
            for i in index::sample(&mut rng, e, m) {
                drop[i] = true;
            }
            graph.with_edges(
                graph
                    .edges()
                    .iter()
                    .zip(drop)
                    .filter(|(_, d)| !d)
                    .map(|(&e, _)| e),
            )
        }
        PerturbSpec::FeatureGaussianNoise(sigma) => {
            if !sigma.is_finite() || sigma < 0.0 {
                return Err(Error::Range(format!(
                    "noise level must be >= 0, got {sigma}"
                )));
            }
            if sigma == 0.0 {
                return Ok(graph.clone());
            }
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::Range(e.to_string()))?;
            let mut x = graph.features().clone();
            x.data_mut()
                .iter_mut()
                .for_each(|v| *v += normal.sample(&mut rng));
            graph.with_features(x)
        }
        PerturbSpec::DropFeatureColumns(m) => {
            let j = graph.n_features();
            if m > j {
                return Err(Error::Range(format!(
                    "cannot drop {m} of {j} feature columns"
                )));
            }
            let mut drop = vec![false; j];
            for c in index::sample(&mut rng, j, m) {
                drop[c] = true;
            }
            let keep: Vec<usize> = (0..j).filter(|&c| !drop[c]).collect();
            let x = graph.features();
            let out = DenseMatrix::from_fn(x.rows(), keep.len(), |i, c| x.get(i, keep[c]));
            graph.with_features(out)
        }
    }
}
