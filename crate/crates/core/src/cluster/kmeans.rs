use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, DenseMatrix};
use crate::par;

/// Lower bound applied to every per-dimension cluster variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Cluster centers with diagonal variances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    centers: DenseMatrix,
    variances: DenseMatrix,
}

impl ClusterModel {
    /// Variances below [`VARIANCE_FLOOR`] are raised to it.
    pub fn new(centers: DenseMatrix, variances: DenseMatrix) -> Result<Self> {
        if centers.shape() != variances.shape() {
            return Err(Error::Shape(format!(
                "centers {:?} vs variances {:?}",
                centers.shape(),
                variances.shape()
            )));
        }
        if !centers.is_finite() || variances.data().iter().any(|v| v.is_nan()) {
            return Err(Error::Data("cluster model has non-finite entries".into()));
        }
        let variances = variances.map(|v| v.max(VARIANCE_FLOOR));
        Ok(Self { centers, variances })
    }

    /// Centers with unit variances.
    pub fn from_centers(centers: DenseMatrix) -> Self {
        let variances = DenseMatrix::from_fn(centers.rows(), centers.cols(), |_, _| 1.0);
        Self { centers, variances }
    }

    /// Means and per-dimension unbiased sample variances of each label group.
    /// Singletons get floor variances; an empty cluster is an error.
    pub fn from_labels(z: &DenseMatrix, labels: &[usize], k: usize) -> Result<Self> {
        if labels.len() != z.rows() {
            return Err(Error::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                z.rows()
            )));
        }
        let d = z.cols();
        let mut counts = vec![0usize; k];
        let mut centers = DenseMatrix::zeros(k, d);
        for (i, &c) in labels.iter().enumerate() {
            if c >= k {
                return Err(Error::Range(format!("label {c} not below {k}")));
            }
            counts[c] += 1;
            for (m, &x) in centers.row_mut(c).iter_mut().zip(z.row(i)) {
                *m += x;
            }
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Range(format!("cluster {empty} has no members")));
        }
        for (c, &n) in counts.iter().enumerate() {
            let inv = 1.0 / n as f64;
            centers.row_mut(c).iter_mut().for_each(|m| *m *= inv);
        }
        let mut variances = DenseMatrix::zeros(k, d);
        for (i, &c) in labels.iter().enumerate() {
            let mu = centers.row(c).to_vec();
            for ((v, &x), m) in variances.row_mut(c).iter_mut().zip(z.row(i)).zip(mu) {
                *v += (x - m) * (x - m);
            }
        }
        for (c, &n) in counts.iter().enumerate() {
            variances.row_mut(c).iter_mut().for_each(|v| {
                *v = if n > 1 { *v / (n - 1) as f64 } else { 0.0 };
            });
        }
        Self::new(centers, variances)
    }

    pub fn centers(&self) -> &DenseMatrix {
        &self.centers
    }

    pub fn variances(&self) -> &DenseMatrix {
        &self.variances
    }

    pub fn k(&self) -> usize {
        self.centers.rows()
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest-inertia run wins.
    pub n_init: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            n_init: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub model: ClusterModel,
    pub labels: Vec<usize>,
    /// Sum of squared distances to the assigned centers.
    pub inertia: f64,
    pub iterations: usize,
}

pub fn kmeans(z: &DenseMatrix, k: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with(z, k, seed, &KMeansOptions::default())
}

/// Lloyd iterations from k-means++ seeds. Empty clusters are reseeded with
/// the point farthest from its current center.
pub fn kmeans_with(
    z: &DenseMatrix,
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<KMeansResult> {
    let n = z.rows();
    if k == 0 || n < k {
        return Err(Error::Range(format!(
            "k-means needs 1 <= K <= N, got K = {k}, N = {n}"
        )));
    }
    if !z.is_finite() {
        return Err(Error::Numerics(
            "k-means input has non-finite entries".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(DenseMatrix, Vec<usize>, f64, usize)> = None;
    for _ in 0..opts.n_init.max(1) {
        let init = plus_plus_init(z, k, &mut rng);
        let run = lloyd(z, init, opts.max_iter);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (centers, labels, inertia, iterations) = best.expect("at least one restart");
    // Degenerate inputs (fewer distinct points than K) can leave a cluster
    // empty; it keeps its Lloyd center with floor variances.
    let model = match ClusterModel::from_labels(z, &labels, k) {
        Ok(m) => m,
        Err(_) => {
            let mut variances = DenseMatrix::zeros(k, z.cols());
            let mut centers = centers;
            for c in 0..k {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                if members.is_empty() {
                    continue;
                }
                let sub = ClusterModel::from_labels(
                    &z.select_rows(&members),
                    &vec![0; members.len()],
                    1,
                )?;
                centers.row_mut(c).copy_from_slice(sub.centers().row(0));
                variances.row_mut(c).copy_from_slice(sub.variances().row(0));
            }
            ClusterModel::new(centers, variances)?
        }
    };
    Ok(KMeansResult {
        model,
        labels,
        inertia,
        iterations,
    })
}

fn plus_plus_init(z: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let n = z.rows();
    let mut centers = DenseMatrix::zeros(k, z.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(z.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(z.row(i), z.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(z.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(z.row(i), z.row(pick)));
        }
    }
    centers
}

/// Index of the nearest center and the squared distance to it; ties go to the lowest index.
pub(crate) fn nearest(x: &[f64], centers: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.rows() {
        let d = sq_dist(x, centers.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(
    z: &DenseMatrix,
    mut centers: DenseMatrix,
    max_iter: usize,
) -> (DenseMatrix, Vec<usize>, f64, usize) {
    let (n, d, k) = (z.rows(), z.cols(), centers.rows());
    let mut labels = vec![usize::MAX; n];
    let mut iterations = 0;
    loop {
        let assigned = par::map_range(n, |i| nearest(z.row(i), &centers));
        let changed = assigned.iter().zip(&labels).any(|(a, &l)| a.0 != l);
        for (l, a) in labels.iter_mut().zip(&assigned) {
            *l = a.0;
        }
        if !changed || iterations >= max_iter {
            let inertia = assigned.iter().map(|a| a.1).sum();
            return (centers, labels, inertia, iterations);
        }
        iterations += 1;

        let mut counts = vec![0usize; k];
        let mut sums = DenseMatrix::zeros(k, d);
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, &x) in sums.row_mut(c).iter_mut().zip(z.row(i)) {
                *s += x;
            }
        }
        let mut dist: Vec<f64> = assigned.iter().map(|a| a.1).collect();
        for c in 0..k {
            if counts[c] == 0 {
                // Steal the worst-served point from a cluster that can spare it.
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    let old = labels[i];
                    counts[old] -= 1;
                    for (s, &x) in sums.row_mut(old).iter_mut().zip(z.row(i)) {
                        *s -= x;
                    }
                    labels[i] = c;
                    counts[c] = 1;
                    sums.row_mut(c).copy_from_slice(z.row(i));
                    dist[i] = 0.0;
                }
            }
        }
        for (c, &n) in counts.iter().enumerate() {
            if n > 0 {
                let inv = 1.0 / n as f64;
                for (m, &s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *m = s * inv;
                }
            }
        }
    }
}
