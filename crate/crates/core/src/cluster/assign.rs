use serde::{Deserialize, Serialize};

use super::kmeans::ClusterModel;
use crate::error::{Error, Result};
use crate::linalg::{sq_dist, DenseMatrix};
use crate::par;

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentKind {
    /// Softmax of negative Mahalanobis distances under diagonal variances.
    GaussianPPrime,
    /// Normalized Student's t kernel `(1 + ‖z − μ‖²)⁻¹`.
    StudentTP,
    HardOneHot,
}

/// Row-stochastic N×K assignment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftAssignment {
    matrix: DenseMatrix,
    kind: AssignmentKind,
}

impl SoftAssignment {
    /// Checks that entries are non-negative and rows sum to one.
    pub fn new(matrix: DenseMatrix, kind: AssignmentKind) -> Result<Self> {
        for i in 0..matrix.rows() {
            let row = matrix.row(i);
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::Data(format!(
                    "assignment row {i} has invalid entries"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Data(format!("assignment row {i} sums to {s}")));
            }
        }
        Ok(Self { matrix, kind })
    }

    /// One-hot rows from hard labels.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&c| c >= k) {
            return Err(Error::Range(format!("label {bad} not below {k}")));
        }
        let matrix = DenseMatrix::from_fn(
            labels.len(),
            k,
            |i, j| if labels[i] == j { 1.0 } else { 0.0 },
        );
        Ok(Self {
            matrix,
            kind: AssignmentKind::HardOneHot,
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> AssignmentKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn k(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn is_hard(&self) -> bool {
        self.kind == AssignmentKind::HardOneHot
    }

    /// Row-wise argmax, ties to the lowest index.
    pub fn labels(&self) -> Vec<usize> {
        (0..self.n()).map(|i| argmax(self.row(i))).collect()
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        s += *v;
    }
    logits.iter_mut().for_each(|v| *v /= s);
}

pub fn gaussian_soft_assign(z: &DenseMatrix, model: &ClusterModel) -> Result<SoftAssignment> {
    if z.cols() != model.dim() {
        return Err(Error::Shape(format!(
            "embedding dim {} vs cluster model dim {}",
            z.cols(),
            model.dim()
        )));
    }
    let (k, mu, var) = (model.k(), model.centers(), model.variances());
    let mut out = DenseMatrix::zeros(z.rows(), k);
    par::for_each_chunk_mut(out.data_mut(), k, |i, row| {
        let zi = z.row(i);
        for (j, r) in row.iter_mut().enumerate() {
            let m: f64 = zi
                .iter()
                .zip(mu.row(j))
                .zip(var.row(j))
                .map(|((x, m), v)| (x - m) * (x - m) / v)
                .sum();
            *r = -0.5 * m;
        }
        softmax_in_place(row);
    });
    Ok(SoftAssignment {
        matrix: out,
        kind: AssignmentKind::GaussianPPrime,
    })
}

/// Student's t soft assignment with one degree of freedom.
///
/// The kernel is `(1 + ‖z − μ‖²)⁻¹`, so nearer centers get more mass.
pub fn student_t_assign(z: &DenseMatrix, centers: &DenseMatrix) -> Result<SoftAssignment> {
    if z.cols() != centers.cols() {
        return Err(Error::Shape(format!(
            "embedding dim {} vs centers dim {}",
            z.cols(),
            centers.cols()
        )));
    }
    let k = centers.rows();
    let mut out = DenseMatrix::zeros(z.rows(), k);
    par::for_each_chunk_mut(out.data_mut(), k, |i, row| {
        let mut s = 0.0;
        for (j, r) in row.iter_mut().enumerate() {
            *r = 1.0 / (1.0 + sq_dist(z.row(i), centers.row(j)));
            s += *r;
        }
        row.iter_mut().for_each(|r| *r /= s);
    });
    Ok(SoftAssignment {
        matrix: out,
        kind: AssignmentKind::StudentTP,
    })
}

/// One-hot at each row's argmax.
pub fn hard_target(p: &SoftAssignment) -> SoftAssignment {
    SoftAssignment::from_labels(&p.labels(), p.k()).expect("argmax is below K")
}
