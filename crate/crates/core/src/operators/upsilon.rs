use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, DenseMatrix, SparseMatrix};
use crate::model::write_atomic;

/// One representative node per cluster; `None` when the cluster has no
/// reliable member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CentroidNodes {
    pub pi: Vec<Option<usize>>,
}

/// For each cluster `j`, averages the reliable members assigned to `j` and
/// picks the reliable node nearest that mean (lowest index on ties).
pub fn compute_centroid_nodes(
    z: &DenseMatrix,
    labels: &[usize],
    omega: &[usize],
    k: usize,
) -> Result<CentroidNodes> {
    if labels.len() != z.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            z.rows()
        )));
    }
    let d = z.cols();
    let mut sums = DenseMatrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for &i in omega {
        let c = labels[i];
        if c >= k {
            return Err(Error::Range(format!("label {c} not below {k}")));
        }
        counts[c] += 1;
        for (s, &x) in sums.row_mut(c).iter_mut().zip(z.row(i)) {
            *s += x;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::Operator("no cluster has a reliable member".into()));
    }
    let pi = (0..k)
        .map(|c| {
            if counts[c] == 0 {
                return None;
            }
            let inv = 1.0 / counts[c] as f64;
            let mean: Vec<f64> = sums.row(c).iter().map(|s| s * inv).collect();
            let mut best: Option<(usize, f64)> = None;
            for &i in omega {
                let dist = sq_dist(z.row(i), &mean);
                if best.is_none_or(|(b, bd)| dist < bd || (dist == bd && i < b)) {
                    best = Some((i, dist));
                }
            }
            best.map(|b| b.0)
        })
        .collect();
    Ok(CentroidNodes { pi })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeTag {
    Original,
    Added,
}

impl EdgeTag {
    pub fn code(self) -> char {
        match self {
            EdgeTag::Original => 'O',
            EdgeTag::Added => 'A',
        }
    }
}

/// Which edits the rewriter may perform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpsilonOptions {
    pub add_edges: bool,
    pub drop_edges: bool,
}

impl Default for UpsilonOptions {
    fn default() -> Self {
        Self {
            add_edges: true,
            drop_edges: true,
        }
    }
}

/// Rewritten reconstruction target with per-edge provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfSupervisionGraph {
    n_nodes: usize,
    /// Canonical `(u, v)`, `u < v`, sorted.
    edges: Vec<(usize, usize)>,
    tags: Vec<EdgeTag>,
    deleted: Vec<(usize, usize)>,
}

impl SelfSupervisionGraph {
    /// The original graph, untouched.
    pub fn identity(n_nodes: usize, edges: &[(usize, usize)]) -> Self {
        let set: BTreeSet<(usize, usize)> =
            edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        let edges: Vec<_> = set.into_iter().collect();
        Self {
            n_nodes,
            tags: vec![EdgeTag::Original; edges.len()],
            edges,
            deleted: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn tags(&self) -> &[EdgeTag] {
        &self.tags
    }

    /// Original edges that were removed, canonical and sorted.
    pub fn deleted(&self) -> &[(usize, usize)] {
        &self.deleted
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn added(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges
            .iter()
            .zip(&self.tags)
            .filter(|(_, t)| **t == EdgeTag::Added)
            .map(|(e, _)| *e)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    /// Binary symmetric adjacency.
    pub fn adjacency(&self) -> SparseMatrix {
        let trip = self
            .edges
            .iter()
            .flat_map(|&(u, v)| [(u, v, 1.0), (v, u, 1.0)])
            .collect();
        SparseMatrix::from_triplets(self.n_nodes, self.n_nodes, trip).expect("edges are in range")
    }

    /// Tab-separated `u v tag` lines, tag `O` (original) or `A` (added).
    pub fn edge_list_tsv(&self) -> String {
        let mut s = String::new();
        for (&(u, v), t) in self.edges.iter().zip(&self.tags) {
            writeln!(s, "{u}\t{v}\t{}", t.code()).expect("write to String");
        }
        s
    }

    pub fn deleted_tsv(&self) -> String {
        let mut s = String::new();
        for &(u, v) in &self.deleted {
            writeln!(s, "{u}\t{v}").expect("write to String");
        }
        s
    }

    /// Writes the edge list to `path` and the deleted edges to
    /// `<path>.deleted.tsv`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_atomic(path, self.edge_list_tsv().as_bytes())?;
        let mut side = path.as_os_str().to_owned();
        side.push(".deleted.tsv");
        write_atomic(Path::new(&side), self.deleted_tsv().as_bytes())
    }
}

/// Rewrites the original graph around the reliable nodes.
///
/// Starting from a copy of the original edges, every reliable node `i` in
/// cluster `k` is linked to the centroid node of `k` when the two are not
/// yet adjacent and the centroid itself is assigned to `k`; every original
/// edge from `i` to a reliable node of another cluster is removed. The
/// result is undirected. A node that is its own centroid gets no self-loop.
pub fn upsilon_transform(
    n_nodes: usize,
    edges: &[(usize, usize)],
    labels: &[usize],
    omega: &[usize],
    centroids: &CentroidNodes,
    opts: UpsilonOptions,
) -> Result<SelfSupervisionGraph> {
    if labels.len() != n_nodes {
        return Err(Error::Shape(format!(
            "{} labels for {n_nodes} nodes",
            labels.len()
        )));
    }
    let mut in_omega = vec![false; n_nodes];
    for &i in omega {
        if i >= n_nodes {
            return Err(Error::Range(format!(
                "reliable node {i} outside 0..{n_nodes}"
            )));
        }
        in_omega[i] = true;
    }
    let original = SelfSupervisionGraph::identity(n_nodes, edges);
    let mut neighbors = vec![Vec::new(); n_nodes];
    for &(u, v) in &original.edges {
        neighbors[u].push(v);
        neighbors[v].push(u);
    }

    let mut added = BTreeSet::new();
    let mut removed = BTreeSet::new();
    for &i in omega {
        let k1 = labels[i];
        if opts.add_edges {
            if let Some(Some(j)) = centroids.pi.get(k1).copied() {
                if j != i && !original.has_edge(i, j) && labels[j] == k1 {
                    added.insert((i.min(j), i.max(j)));
                }
            }
        }
        if opts.drop_edges {
            for &l in &neighbors[i] {
                if in_omega[l] && labels[l] != k1 {
                    removed.insert((i.min(l), i.max(l)));
                }
            }
        }
    }

    let mut out: Vec<((usize, usize), EdgeTag)> = original
        .edges
        .iter()
        .filter(|e| !removed.contains(e))
        .map(|&e| (e, EdgeTag::Original))
        .chain(added.into_iter().map(|e| (e, EdgeTag::Added)))
        .collect();
    out.sort_unstable_by_key(|x| x.0);
    Ok(SelfSupervisionGraph {
        n_nodes,
        edges: out.iter().map(|x| x.0).collect(),
        tags: out.iter().map(|x| x.1).collect(),
        deleted: removed.into_iter().collect(),
    })
}

/// The rewrite the clustering phase aims for: every node treated as reliable
/// and assigned its (Hungarian-aligned) true class.
pub fn build_supervised_target(
    n_nodes: usize,
    edges: &[(usize, usize)],
    mapped_truth: &[usize],
    z: &DenseMatrix,
    k: usize,
) -> Result<SelfSupervisionGraph> {
    let all: Vec<usize> = (0..n_nodes).collect();
    let pi = compute_centroid_nodes(z, mapped_truth, &all, k)?;
    upsilon_transform(
        n_nodes,
        edges,
        mapped_truth,
        &all,
        &pi,
        UpsilonOptions::default(),
    )
}
