use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{degree_onehot_features, AttributedGraph};
use crate::linalg::DenseMatrix;
use crate::operators::{CentroidNodes, SelfSupervisionGraph};

/// Stochastic block model with one block per entry of `sizes`, labeled by
/// block, with degree one-hot features.
pub fn planted_partition(
    sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<AttributedGraph> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Error::Range(format!(
            "edge probabilities {p_in}, {p_out} outside [0, 1]"
        )));
    }
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let bare = AttributedGraph::new(
        "planted",
        n,
        edges.iter().copied(),
        DenseMatrix::zeros(n, 0),
        Some(labels.clone()),
        sizes.len(),
    )?;
    bare.with_features(degree_onehot_features(&bare))
}

/// Clusters whose centroid node is linked in `graph` to every other
/// reliable member of its cluster (a star over Ω). Clusters without a
/// centroid or without other reliable members do not count.
pub fn star_count(
    graph: &SelfSupervisionGraph,
    omega: &[usize],
    labels: &[usize],
    centroids: &CentroidNodes,
) -> usize {
    centroids
        .pi
        .iter()
        .enumerate()
        .filter(|(k, c)| {
            let Some(c) = **c else { return false };
            let leaves: Vec<usize> = omega
                .iter()
                .copied()
                .filter(|&i| i != c && labels[i] == *k)
                .collect();
            !leaves.is_empty() && leaves.iter().all(|&i| graph.has_edge(i, c))
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_are_labeled_and_deterministic() {
        let g = planted_partition(&[10, 10], 0.8, 0.05, 4).unwrap();
        assert_eq!(g.n_nodes(), 20);
        assert_eq!(g.labels().unwrap()[15], 1);
        assert_eq!(g, planted_partition(&[10, 10], 0.8, 0.05, 4).unwrap());
        let full = planted_partition(&[3, 2], 1.0, 0.0, 0).unwrap();
        assert_eq!(full.n_edges(), 3 + 1);
    }
}
