use serde::{Deserialize, Serialize};

use super::AttributedGraph;
use crate::linalg::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyMode {
    /// `D̃^{-1/2}(A+I)D̃^{-1/2}`, used for GCN propagation.
    Propagation,
    /// `D^{-1/2} A D^{-1/2}` on the self-loop-free graph; isolated nodes give zero rows.
    Target,
}

/// Symmetrically normalized adjacency together with the mode that built it.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    pub matrix: SparseMatrix,
    pub mode: AdjacencyMode,
}

pub fn normalize_adjacency(graph: &AttributedGraph, mode: AdjacencyMode) -> NormalizedAdjacency {
    normalize_sparse(&graph.adjacency(), mode)
}

/// Normalizes any symmetric adjacency. In propagation mode a unit self-loop
/// is added to every node first.
pub fn normalize_sparse(adj: &SparseMatrix, mode: AdjacencyMode) -> NormalizedAdjacency {
    let n = adj.rows();
    let base = match mode {
        AdjacencyMode::Propagation => adj
            .add_scaled(1.0, &SparseMatrix::identity(n))
            .expect("square adjacency"),
        AdjacencyMode::Target => adj.clone(),
    };
    let inv_sqrt: Vec<f64> = base
        .row_sums()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let trip = base
        .triplets()
        .filter(|&(_, _, v)| v != 0.0)
        .map(|(i, j, v)| (i, j, v * inv_sqrt[i] * inv_sqrt[j]))
        .collect();
    NormalizedAdjacency {
        matrix: SparseMatrix::from_triplets(n, n, trip).expect("same shape"),
        mode,
    }
}
