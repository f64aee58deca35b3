//! Losses on embeddings `Z` with closed-form gradients.
//!
//! Pairwise terms run over all ordered pairs `(i, j)`, diagonal included,
//! with logits `s_ij = z_i · z_j`. They are evaluated one row at a time so
//! no N×N matrix is ever formed.

use serde::{Deserialize, Serialize};

use crate::cluster::SoftAssignment;
use crate::error::{Error, Result};
use crate::linalg::{dot, sq_dist, DenseMatrix, SparseMatrix};
use crate::par;

/// `log(1 + e^s)` without overflow.
#[inline]
pub fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconWeighting {
    /// Unweighted sum of the binary cross-entropy over all ordered pairs.
    Plain,
    /// Mean cross-entropy with positives up-weighted by `(N² − P)/P` and the
    /// whole sum scaled by `N²/(2(N² − P))`, where `P` is the total target mass.
    PosWeighted,
}

fn check_target(z: &DenseMatrix, a: &SparseMatrix) -> Result<()> {
    if a.rows() != z.rows() || a.cols() != z.rows() {
        return Err(Error::Shape(format!(
            "target {:?} for {} embeddings",
            a.shape(),
            z.rows()
        )));
    }
    Ok(())
}

/// Positive weight and global scale of the weighted loss. A target with
/// no positive (or no negative) mass falls back to `(1, 1)`.
pub fn pos_weight_and_norm(n: usize, a: &SparseMatrix) -> (f64, f64) {
    let total = (n * n) as f64;
    let pos: f64 = a.values().iter().sum();
    if pos <= 0.0 || pos >= total {
        return (1.0, 1.0);
    }
    ((total - pos) / pos, total / (2.0 * (total - pos)))
}

/// Reconstruction loss of `sigmoid(Z Zᵀ)` against `a`.
pub fn recon_loss(z: &DenseMatrix, a: &SparseMatrix, weighting: ReconWeighting) -> Result<f64> {
    check_target(z, a)?;
    Ok(recon_pass(z, a, weighting, false).0)
}

/// Loss and `∂L/∂Z`.
pub fn recon_loss_grad(
    z: &DenseMatrix,
    a: &SparseMatrix,
    weighting: ReconWeighting,
) -> Result<(f64, DenseMatrix)> {
    check_target(z, a)?;
    let (l, g) = recon_pass(z, a, weighting, true);
    Ok((l, g.expect("gradient requested")))
}

/// Closed-form gradient of the plain loss: `Σ_j (2σ(s_ij) − a_ij − a_ji) z_j`.
pub fn recon_grad_z(z: &DenseMatrix, a: &SparseMatrix) -> Result<DenseMatrix> {
    Ok(recon_loss_grad(z, a, ReconWeighting::Plain)?.1)
}

/// Factors multiplied before one logarithm; `2^64` stays far from overflow.
const LOG_BATCH: usize = 64;

fn recon_pass(
    z: &DenseMatrix,
    a: &SparseMatrix,
    weighting: ReconWeighting,
    want_grad: bool,
) -> (f64, Option<DenseMatrix>) {
    let (n, d) = (z.rows(), z.cols());
    let (w, scale) = match weighting {
        ReconWeighting::Plain => (1.0, 1.0),
        ReconWeighting::PosWeighted => {
            let (w, norm) = pos_weight_and_norm(n, a);
            (w, norm / (n * n) as f64)
        }
    };
    let at = if want_grad && !a.is_symmetric(0.0) {
        Some(a.transpose())
    } else {
        None
    };
    // Per-entry loss: ℓ(a, s) = softplus(s) − a·s + (w − 1)·a·softplus(−s)
    // and ∂ℓ/∂s = σ(s) − a − (w − 1)·a·σ(−s).
    let ds_correction = |av: f64, s: f64| -av - (w - 1.0) * av * sigmoid(-s);

    let rows = par::map_range(n, |i| {
        let zi = z.row(i);
        let mut loss = 0.0;
        let mut g = if want_grad { vec![0.0; d] } else { Vec::new() };
        // softplus(s) = max(s, 0) + ln(1 + e^{−|s|}); the logarithms are
        // taken of running products, each factor lying in (1, 2].
        let mut coef = vec![0.0; n];
        for (j, c) in coef.iter_mut().enumerate() {
            *c = dot(zi, z.row(j));
        }
        for chunk in coef.chunks_mut(LOG_BATCH) {
            let mut prod = 1.0;
            for c in chunk.iter_mut() {
                let s = *c;
                // Clamping keeps exp out of its slow subnormal range.
                let e = (-s.abs().min(700.0)).exp();
                loss += s.max(0.0);
                prod *= 1.0 + e;
                // 2σ(s), kept for the gradient pass.
                let num = if s >= 0.0 { 2.0 } else { 2.0 * e };
                *c = num / (1.0 + e);
            }
            loss += prod.ln();
        }
        if want_grad {
            for (j, &c) in coef.iter().enumerate() {
                for (gk, &x) in g.iter_mut().zip(z.row(j)) {
                    *gk += c * x;
                }
            }
        }
        let (idx, vals) = a.row(i);
        for (&j, &av) in idx.iter().zip(vals) {
            let s = dot(zi, z.row(j));
            loss += -av * s + (w - 1.0) * av * softplus(-s);
            if want_grad {
                let c = ds_correction(av, s);
                for (gk, &x) in g.iter_mut().zip(z.row(j)) {
                    *gk += c * x;
                }
            }
        }
        if want_grad {
            // Contributions of z_i in the column role of each target entry (j, i).
            let (idx, vals) = match &at {
                Some(t) => t.row(i),
                None => a.row(i),
            };
            for (&j, &av) in idx.iter().zip(vals) {
                let s = dot(zi, z.row(j));
                let c = ds_correction(av, s);
                for (gk, &x) in g.iter_mut().zip(z.row(j)) {
                    *gk += c * x;
                }
            }
        }
        (loss, g)
    });

    let mut total = 0.0;
    let mut grad = want_grad.then(|| DenseMatrix::zeros(n, d));
    for (i, (l, g)) in rows.into_iter().enumerate() {
        total += l;
        if let Some(gm) = grad.as_mut() {
            for (o, v) in gm.row_mut(i).iter_mut().zip(g) {
                *o = scale * v;
            }
        }
    }
    (scale * total, grad)
}

/// Plain cross-entropy written as `−Σ [a log σ(s) + (1 − a) log(1 − σ(s))]`
/// on a dense logit matrix. Only for small reference checks.
pub fn recon_loss_dense_reference(z: &DenseMatrix, a: &DenseMatrix) -> f64 {
    let n = z.rows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = sigmoid(dot(z.row(i), z.row(j)));
            let y = a.get(i, j);
            let mut t = 0.0;
            if y != 0.0 {
                t -= y * p.ln();
            }
            if y != 1.0 {
                t -= (1.0 - y) * (1.0 - p).ln();
            }
            total += t;
        }
    }
    total
}

/// `½ Σ_ij a_ij ‖z_i − z_j‖²`.
pub fn laplacian_quadratic(z: &DenseMatrix, a: &SparseMatrix) -> Result<f64> {
    check_target(z, a)?;
    let rows = par::map_range(z.rows(), |i| {
        let (idx, vals) = a.row(i);
        idx.iter()
            .zip(vals)
            .map(|(&j, &w)| w * sq_dist(z.row(i), z.row(j)))
            .sum::<f64>()
    });
    Ok(0.5 * rows.iter().sum::<f64>())
}

/// `∂/∂z_i = Σ_j (a_ij + a_ji)(z_i − z_j)`.
pub fn laplacian_quadratic_grad(z: &DenseMatrix, a: &SparseMatrix) -> Result<DenseMatrix> {
    check_target(z, a)?;
    let at = a.transpose();
    let d = z.cols();
    let mut g = DenseMatrix::zeros(z.rows(), d);
    par::for_each_chunk_mut(g.data_mut(), d.max(1), |i, out| {
        let zi = z.row(i);
        for m in [a, &at] {
            let (idx, vals) = m.row(i);
            for (&j, &w) in idx.iter().zip(vals) {
                for ((o, &x), &y) in out.iter_mut().zip(zi).zip(z.row(j)) {
                    *o += w * (x - y);
                }
            }
        }
    });
    Ok(g)
}

/// `Σ_ij [log(1 + exp(z_i·z_j)) − ½ a_ij (‖z_i‖² + ‖z_j‖²)]`.
pub fn regularizer_r(z: &DenseMatrix, a: &SparseMatrix) -> Result<f64> {
    check_target(z, a)?;
    let n = z.rows();
    let norms: Vec<f64> = (0..n).map(|i| dot(z.row(i), z.row(i))).collect();
    let rows = par::map_range(n, |i| {
        let zi = z.row(i);
        let mut s: f64 = (0..n).map(|j| softplus(dot(zi, z.row(j)))).sum();
        let (idx, vals) = a.row(i);
        for (&j, &w) in idx.iter().zip(vals) {
            s -= 0.5 * w * (norms[i] + norms[j]);
        }
        s
    });
    Ok(rows.iter().sum())
}

/// Members of each cluster among `rows` (all nodes when `None`).
fn groups(labels: &[usize], k: usize, rows: Option<&[usize]>) -> Vec<Vec<usize>> {
    let mut g = vec![Vec::new(); k];
    match rows {
        Some(r) => r.iter().for_each(|&i| g[labels[i]].push(i)),
        None => labels.iter().enumerate().for_each(|(i, &c)| g[c].push(i)),
    }
    g
}

fn group_means(z: &DenseMatrix, groups: &[Vec<usize>]) -> DenseMatrix {
    let mut mu = DenseMatrix::zeros(groups.len(), z.cols());
    for (c, members) in groups.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let row = mu.row_mut(c);
        for &i in members {
            for (m, &x) in row.iter_mut().zip(z.row(i)) {
                *m += x;
            }
        }
        let inv = 1.0 / members.len() as f64;
        row.iter_mut().for_each(|m| *m *= inv);
    }
    mu
}

fn check_labels(z: &DenseMatrix, labels: &[usize], k: usize) -> Result<()> {
    if labels.len() != z.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            z.rows()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= k) {
        return Err(Error::Range(format!("label {bad} not below {k}")));
    }
    Ok(())
}

/// Embedded k-means loss `Σ_k Σ_{i∈C_k} ‖z_i − μ_k‖²` with `μ_k` the mean of
/// the members, optionally restricted to a subset of rows.
pub fn kmeans_embed_loss(
    z: &DenseMatrix,
    labels: &[usize],
    k: usize,
    rows: Option<&[usize]>,
) -> Result<f64> {
    check_labels(z, labels, k)?;
    let g = groups(labels, k, rows);
    let mu = group_means(z, &g);
    Ok(g.iter()
        .enumerate()
        .flat_map(|(c, m)| m.iter().map(move |&i| (c, i)))
        .map(|(c, i)| sq_dist(z.row(i), mu.row(c)))
        .sum())
}

/// `2(z_i − μ_k)` for included rows, zero elsewhere. The dependence of
/// `μ_k` on `z_i` contributes nothing because members' offsets sum to zero.
pub fn kmeans_embed_grad(
    z: &DenseMatrix,
    labels: &[usize],
    k: usize,
    rows: Option<&[usize]>,
) -> Result<DenseMatrix> {
    check_labels(z, labels, k)?;
    let g = groups(labels, k, rows);
    let mu = group_means(z, &g);
    let mut out = DenseMatrix::zeros(z.rows(), z.cols());
    for (c, members) in g.iter().enumerate() {
        for &i in members {
            for ((o, &x), &m) in out.row_mut(i).iter_mut().zip(z.row(i)).zip(mu.row(c)) {
                *o = 2.0 * (x - m);
            }
        }
    }
    Ok(out)
}

/// Probabilities below this are clamped inside the logarithm of the KL loss.
pub const KL_P_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlReduction {
    Sum,
    /// Divide by the number of rows included.
    Mean,
}

#[derive(Clone, Debug)]
pub struct KlLoss {
    pub loss: f64,
    pub grad_z: DenseMatrix,
    pub grad_centers: DenseMatrix,
    /// Some `p_ij` with `q_ij > 0` was below [`KL_P_FLOOR`].
    pub clamped: bool,
}

/// `KL(Q‖P) = Σ_i Σ_j q_ij log(q_ij / p_ij)` over the selected rows, with
/// `P` the Student's t assignment of `z` to `centers` and `Q` held fixed.
///
/// With kernel `k_ij = (1 + ‖z_i − μ_j‖²)⁻¹` the per-row derivative is
/// `∂L_i/∂‖z_i − μ_j‖² = k_ij (q_ij − p_ij Σ_l q_il)`.
pub fn dgae_clus_loss(
    z: &DenseMatrix,
    centers: &DenseMatrix,
    q: &SoftAssignment,
    rows: Option<&[usize]>,
    reduction: KlReduction,
) -> Result<KlLoss> {
    let (n, d, k) = (z.rows(), z.cols(), centers.rows());
    if centers.cols() != d || q.n() != n || q.k() != k {
        return Err(Error::Shape(format!(
            "Z {:?}, centers {:?}, Q {}x{}",
            z.shape(),
            centers.shape(),
            q.n(),
            q.k()
        )));
    }
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..n).collect();
            &all
        }
    };
    let scale = match reduction {
        KlReduction::Sum => 1.0,
        KlReduction::Mean if rows.is_empty() => 0.0,
        KlReduction::Mean => 1.0 / rows.len() as f64,
    };
    let per_row = par::map_range(rows.len(), |r| {
        let i = rows[r];
        let zi = z.row(i);
        let kern: Vec<f64> = (0..k)
            .map(|j| 1.0 / (1.0 + sq_dist(zi, centers.row(j))))
            .collect();
        let total: f64 = kern.iter().sum();
        let qi = q.row(i);
        let qsum: f64 = qi.iter().sum();
        let mut loss = 0.0;
        let mut clamped = false;
        let mut coef = vec![0.0; k];
        for j in 0..k {
            let p = kern[j] / total;
            if qi[j] > 0.0 {
                if p < KL_P_FLOOR {
                    clamped = true;
                }
                loss += qi[j] * (qi[j].ln() - p.max(KL_P_FLOOR).ln());
            }
            coef[j] = kern[j] * (qi[j] - p * qsum);
        }
        (loss, coef, clamped)
    });

    let mut loss = 0.0;
    let mut clamped = false;
    let mut grad_z = DenseMatrix::zeros(n, d);
    let mut grad_centers = DenseMatrix::zeros(k, d);
    for (r, (l, coef, c)) in per_row.into_iter().enumerate() {
        let i = rows[r];
        loss += l;
        clamped |= c;
        let zi = z.row(i).to_vec();
        for (j, &cj) in coef.iter().enumerate() {
            let f = 2.0 * cj * scale;
            let gz = grad_z.row_mut(i);
            for ((g, &x), &m) in gz.iter_mut().zip(&zi).zip(centers.row(j)) {
                *g += f * (x - m);
            }
            let gc = grad_centers.row_mut(j);
            for ((g, &x), &m) in gc.iter_mut().zip(&zi).zip(centers.row(j)) {
                *g -= f * (x - m);
            }
        }
    }
    Ok(KlLoss {
        loss: scale * loss,
        grad_z,
        grad_centers,
        clamped,
    })
}

#[derive(Clone, Debug)]
pub struct VgaePrior {
    pub kl: f64,
    pub grad_mu: DenseMatrix,
    pub grad_logstd: DenseMatrix,
}

/// Gaussian prior term `(1/N²) Σ_i Σ_d ½(μ² + σ² − 1 − log σ²)`, i.e. the
/// per-node KL averaged over nodes and divided once more by N, with
/// `log σ` as the head output.
pub fn vgae_kl_prior(mu: &DenseMatrix, logstd: &DenseMatrix) -> Result<VgaePrior> {
    if mu.shape() != logstd.shape() {
        return Err(Error::Shape(
            "mean and log-std heads differ in shape".into(),
        ));
    }
    let n = mu.rows() as f64;
    let c = 1.0 / (n * n);
    let mut kl = 0.0;
    for (&m, &l) in mu.data().iter().zip(logstd.data()) {
        kl += 0.5 * (m * m + (2.0 * l).exp() - 1.0 - 2.0 * l);
    }
    Ok(VgaePrior {
        kl: c * kl,
        grad_mu: mu.scaled(c),
        grad_logstd: logstd.map(|l| c * ((2.0 * l).exp() - 1.0)),
    })
}

/// Terms of the VGAE objective at one training sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VgaeTerms {
    pub recon: f64,
    pub kl_prior: f64,
}

pub fn vgae_loss_terms(
    z_sample: &DenseMatrix,
    mu: &DenseMatrix,
    logstd: &DenseMatrix,
    target: &SparseMatrix,
) -> Result<VgaeTerms> {
    Ok(VgaeTerms {
        recon: recon_loss(z_sample, target, ReconWeighting::PosWeighted)?,
        kl_prior: vgae_kl_prior(mu, logstd)?.kl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> SparseMatrix {
        SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn zero_embedding_costs_ln2_per_pair() {
        let z = DenseMatrix::zeros(3, 2);
        let l = recon_loss(&z, &path3(), ReconWeighting::Plain).unwrap();
        assert!((l - 9.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(recon_grad_z(&z, &path3())
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        assert!(
            (regularizer_r(&z, &path3()).unwrap() - 9.0 * std::f64::consts::LN_2).abs() < 1e-12
        );
        assert_eq!(laplacian_quadratic(&z, &path3()).unwrap(), 0.0);
    }

    #[test]
    fn saturated_all_ones_target() {
        let z = DenseMatrix::from_fn(3, 1, |_, _| 30.0);
        let ones = SparseMatrix::from_dense(&DenseMatrix::from_fn(3, 3, |_, _| 1.0));
        assert!(recon_loss(&z, &ones, ReconWeighting::Plain).unwrap() < 1e-300_f64.max(1e-12));
    }

    #[test]
    fn two_point_kmeans() {
        let z = DenseMatrix::from_vec(2, 1, vec![0.0, 2.0]).unwrap();
        assert_eq!(kmeans_embed_loss(&z, &[0, 0], 1, None).unwrap(), 2.0);
        let g = kmeans_embed_grad(&z, &[0, 0], 1, None).unwrap();
        assert_eq!(g.data(), &[-2.0, 2.0]);
    }

    #[test]
    fn kl_collapses_for_one_hot_q() {
        let z = DenseMatrix::from_vec(2, 1, vec![0.0, 1.5]).unwrap();
        let mu = DenseMatrix::from_vec(2, 1, vec![0.0, 2.0]).unwrap();
        let p = crate::cluster::student_t_assign(&z, &mu).unwrap();
        let q = crate::cluster::hard_target(&p);
        let kl = dgae_clus_loss(&z, &mu, &q, None, KlReduction::Sum).unwrap();
        let expect = -(p.row(0)[0].ln() + p.row(1)[1].ln());
        assert!((kl.loss - expect).abs() < 1e-12);
        assert!(!kl.clamped);
    }

    #[test]
    fn prior_closed_forms() {
        let mu = DenseMatrix::zeros(2, 3);
        let ls = DenseMatrix::zeros(2, 3);
        assert_eq!(vgae_kl_prior(&mu, &ls).unwrap().kl, 0.0);
        // σ² = e means log σ = ½.
        let ls = DenseMatrix::from_fn(1, 1, |_, _| 0.5);
        let kl = vgae_kl_prior(&DenseMatrix::zeros(1, 1), &ls).unwrap().kl;
        assert!((kl - 0.5 * (std::f64::consts::E - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn pos_weight_without_edges() {
        assert_eq!(
            pos_weight_and_norm(3, &SparseMatrix::zeros(3, 3)),
            (1.0, 1.0)
        );
        let (w, norm) = pos_weight_and_norm(3, &path3());
        assert_eq!(w, 5.0 / 4.0);
        assert_eq!(norm, 9.0 / 10.0);
    }
}
