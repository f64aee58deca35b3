//! Attributed graphs: the validated in-memory type, dataset files,
//! featurization, adjacency normalization and seeded perturbations.

mod features;
mod io;
mod normalize;
mod perturb;

use sha2::{Digest, Sha256};

pub use features::{degree_onehot_features, row_normalize};
pub use io::{load_dataset, save_dataset, DatasetMeta};
pub use normalize::{normalize_adjacency, normalize_sparse, AdjacencyMode, NormalizedAdjacency};
pub use perturb::{perturb_graph, PerturbSpec};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};

/// Undirected graph with node features and optional ground-truth labels.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted and unique, so the
/// adjacency built from them is symmetric and free of self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributedGraph {
    name: String,
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: DenseMatrix,
    labels: Option<Vec<usize>>,
    k_clusters: usize,
}

impl AttributedGraph {
    /// Validates and canonicalizes the parts of a graph. Reversed and
    /// duplicated edges collapse into one; self-loops are rejected.
    pub fn new(
        name: impl Into<String>,
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: DenseMatrix,
        labels: Option<Vec<usize>>,
        k_clusters: usize,
    ) -> Result<Self> {
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::Range(format!(
                    "edge ({u}, {v}) references a node outside 0..{n_nodes}"
                )));
            }
            if u == v {
                return Err(Error::Data(format!("self-loop on node {u}")));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();
        if features.rows() != n_nodes {
            return Err(Error::Shape(format!(
                "{} feature rows for {n_nodes} nodes",
                features.rows()
            )));
        }
        if !features.is_finite() {
            return Err(Error::Data("feature matrix has non-finite entries".into()));
        }
        if let Some(l) = &labels {
            if l.len() != n_nodes {
                return Err(Error::Shape(format!(
                    "{} labels for {n_nodes} nodes",
                    l.len()
                )));
            }
            if let Some(&bad) = l.iter().find(|&&c| c >= k_clusters) {
                return Err(Error::Range(format!(
                    "label {bad} not below k_clusters = {k_clusters}"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            n_nodes,
            edges: canon,
            features,
            labels,
            k_clusters,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical undirected edges `(u, v)`, `u < v`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn k_clusters(&self) -> usize {
        self.k_clusters
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    /// Binary symmetric adjacency without self-loops.
    pub fn adjacency(&self) -> SparseMatrix {
        let trip = self
            .edges
            .iter()
            .flat_map(|&(u, v)| [(u, v, 1.0), (v, u, 1.0)])
            .collect();
        SparseMatrix::from_triplets(self.n_nodes, self.n_nodes, trip)
            .expect("canonical edges are in range")
    }

    pub fn with_features(&self, features: DenseMatrix) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.n_nodes,
            self.edges.iter().copied(),
            features,
            self.labels.clone(),
            self.k_clusters,
        )
    }

    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.n_nodes,
            edges,
            self.features.clone(),
            self.labels.clone(),
            self.k_clusters,
        )
    }

    /// SHA-256 over the structure, feature bits and labels. Two graphs with
    /// the same hash feed identical inputs to a model.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_nodes as u64).to_le_bytes());
        h.update((self.k_clusters as u64).to_le_bytes());
        for &(u, v) in &self.edges {
            h.update((u as u64).to_le_bytes());
            h.update((v as u64).to_le_bytes());
        }
        h.update((self.features.cols() as u64).to_le_bytes());
        for x in self.features.data() {
            h.update(x.to_bits().to_le_bytes());
        }
        if let Some(l) = &self.labels {
            for &c in l {
                h.update((c as u64).to_le_bytes());
            }
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
