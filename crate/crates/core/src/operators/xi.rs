use crate::cluster::{gaussian_soft_assign, ClusterModel, SoftAssignment};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Nodes whose assignment is confident enough to act on.
#[derive(Clone, Debug, PartialEq)]
pub struct ReliableSet {
    /// Sorted node indices.
    pub omega: Vec<usize>,
    /// Largest assignment score per node.
    pub lambda1: Vec<f64>,
    /// Largest score strictly below `lambda1`, or `lambda1` when no entry is smaller.
    pub lambda2: Vec<f64>,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl ReliableSet {
    /// Every node, with no scores attached.
    pub fn all(n: usize) -> Self {
        Self {
            omega: (0..n).collect(),
            lambda1: vec![1.0; n],
            lambda2: vec![0.0; n],
            alpha1: 0.0,
            alpha2: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.lambda1.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.omega.binary_search(&i).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_nodes()];
        self.omega.iter().for_each(|&i| m[i] = true);
        m
    }

    /// Nodes outside the set, sorted.
    pub fn complement(&self) -> Vec<usize> {
        let m = self.mask();
        (0..m.len()).filter(|&i| !m[i]).collect()
    }
}

/// `(λ¹, λ²)` of one row: the maximum, and the largest entry strictly below it.
pub fn top_two(row: &[f64]) -> (f64, f64) {
    let l1 = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let l2 = row
        .iter()
        .copied()
        .filter(|&p| p < l1)
        .fold(f64::NEG_INFINITY, f64::max);
    (l1, if l2 == f64::NEG_INFINITY { l1 } else { l2 })
}

fn check_thresholds(alpha1: f64, alpha2: f64) -> Result<()> {
    for (name, a) in [("alpha1", alpha1), ("alpha2", alpha2)] {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Range(format!("{name} must lie in [0, 1], got {a}")));
        }
    }
    Ok(())
}

/// Keeps nodes with `λ¹ ≥ α₁` and `λ¹ − λ² ≥ α₂`, scoring a soft assignment directly.
pub fn xi_select_soft(p: &DenseMatrix, alpha1: f64, alpha2: f64) -> Result<ReliableSet> {
    check_thresholds(alpha1, alpha2)?;
    if p.cols() < 2 {
        return Err(Error::Range(format!(
            "reliability needs at least 2 clusters, got {}",
            p.cols()
        )));
    }
    let n = p.rows();
    let mut lambda1 = Vec::with_capacity(n);
    let mut lambda2 = Vec::with_capacity(n);
    let mut omega = Vec::new();
    for i in 0..n {
        let (l1, l2) = top_two(p.row(i));
        if l1 >= alpha1 && l1 - l2 >= alpha2 {
            omega.push(i);
        }
        lambda1.push(l1);
        lambda2.push(l2);
    }
    Ok(ReliableSet {
        omega,
        lambda1,
        lambda2,
        alpha1,
        alpha2,
    })
}

/// Reliable-node sampler. A hard `p` is first softened with the Gaussian
/// assignment of `z` under `model`; a soft `p` is scored as is.
pub fn xi_select(
    z: &DenseMatrix,
    p: &SoftAssignment,
    model: Option<&ClusterModel>,
    alpha1: f64,
    alpha2: f64,
) -> Result<ReliableSet> {
    if p.is_hard() {
        let model = model.ok_or_else(|| {
            Error::Operator("hard assignments need a cluster model to score confidence".into())
        })?;
        let soft = gaussian_soft_assign(z, model)?;
        xi_select_soft(soft.matrix(), alpha1, alpha2)
    } else {
        xi_select_soft(p.matrix(), alpha1, alpha2)
    }
}
