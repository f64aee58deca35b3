use crate::cluster::{hungarian_map, map_truth_to_pred, SoftAssignment};
use crate::error::{Error, Result};
use crate::linalg::{cosine, dot, Cosine, DenseMatrix, SparseMatrix};
use crate::model::losses::{dgae_clus_loss, kmeans_embed_grad, recon_grad_z};
use crate::model::{EncoderInput, GaeModel, KlReduction};

/// Clustering loss whose θ-gradients are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusteringObjective {
    /// Embedded k-means on hard labels.
    KMeans,
    /// KL between one-hot targets and the Student's t assignment to the model's centers.
    StudentT,
}

impl ClusteringObjective {
    pub fn for_model(model: &GaeModel) -> Self {
        if model.arch().clusters_post_hoc() {
            ClusteringObjective::KMeans
        } else {
            ClusteringObjective::StudentT
        }
    }
}

/// θ-gradient of the clustering loss with hard targets `labels` over `rows`.
pub fn clustering_theta_grad(
    model: &GaeModel,
    input: &EncoderInput,
    objective: ClusteringObjective,
    labels: &[usize],
    k: usize,
    rows: Option<&[usize]>,
) -> Result<Vec<f64>> {
    let (z, cache) = model.encode(input)?;
    let gz = match objective {
        ClusteringObjective::KMeans => kmeans_embed_grad(&z, labels, k, rows)?,
        ClusteringObjective::StudentT => {
            let centers = model
                .centers()
                .ok_or_else(|| Error::State("model has no cluster centers".into()))?;
            let q = SoftAssignment::from_labels(labels, centers.rows())?;
            dgae_clus_loss(&z, centers, &q, rows, KlReduction::Sum)?.grad_z
        }
    };
    Ok(model.backprop_theta(input, &cache, &gz)?.flatten())
}

/// θ-gradient of the plain reconstruction loss against `target`.
pub fn recon_theta_grad(
    model: &GaeModel,
    input: &EncoderInput,
    target: &SparseMatrix,
) -> Result<Vec<f64>> {
    let (z, cache) = model.encode(input)?;
    let gz = recon_grad_z(&z, target)?;
    Ok(model.backprop_theta(input, &cache, &gz)?.flatten())
}

/// Cosine between the θ-gradients of the clustering loss under pseudo
/// labels (restricted to `rows`) and under the aligned targets `supervised`
/// (all nodes).
pub fn lambda_fr_with_targets(
    model: &GaeModel,
    input: &EncoderInput,
    objective: ClusteringObjective,
    pseudo: &[usize],
    rows: Option<&[usize]>,
    supervised: &[usize],
    k: usize,
) -> Result<Cosine> {
    let g_pseudo = clustering_theta_grad(model, input, objective, pseudo, k, rows)?;
    let g_sup = clustering_theta_grad(model, input, objective, supervised, k, None)?;
    Ok(cosine(&g_pseudo, &g_sup))
}

/// Feature-randomness alignment: pseudo labels versus ground truth relabeled
/// onto the predicted clusters by Hungarian matching.
pub fn lambda_fr(
    model: &GaeModel,
    input: &EncoderInput,
    objective: ClusteringObjective,
    pseudo: &[usize],
    rows: Option<&[usize]>,
    truth: &[usize],
    k: usize,
) -> Result<Cosine> {
    let pi = hungarian_map(truth, pseudo, k)?;
    let mapped = map_truth_to_pred(truth, &pi);
    lambda_fr_with_targets(model, input, objective, pseudo, rows, &mapped, k)
}

/// Feature-drift alignment: cosine of the reconstruction θ-gradients
/// against two targets.
pub fn lambda_fd(
    model: &GaeModel,
    input: &EncoderInput,
    target: &SparseMatrix,
    supervised_target: &SparseMatrix,
) -> Result<Cosine> {
    let a = recon_theta_grad(model, input, target)?;
    let b = recon_theta_grad(model, input, supervised_target)?;
    Ok(cosine(&a, &b))
}

fn pull(z: &DenseMatrix, i: usize, a: &SparseMatrix) -> Vec<f64> {
    let zi = z.row(i);
    let mut g = vec![0.0; z.cols()];
    let (idx, vals) = a.row(i);
    for (&j, &w) in idx.iter().zip(vals) {
        for ((o, &x), &y) in g.iter_mut().zip(zi).zip(z.row(j)) {
            *o += w * (x - y);
        }
    }
    g
}

/// `⟨Σ_j g1_ij (z_i − z_j), Σ_j g2_ij (z_i − z_j)⟩`.
pub fn pointwise_alignment(z: &DenseMatrix, i: usize, g1: &SparseMatrix, g2: &SparseMatrix) -> f64 {
    dot(&pull(z, i, g1), &pull(z, i, g2))
}

/// Pointwise randomness probe between the predicted and true cluster graphs.
pub fn lambda_prime_fr(
    z: &DenseMatrix,
    i: usize,
    a_clus: &SparseMatrix,
    a_sup: &SparseMatrix,
) -> f64 {
    pointwise_alignment(z, i, a_clus, a_sup)
}

/// Pointwise drift probe between the normalized self-supervision graph and
/// the true cluster graph.
pub fn lambda_prime_fd(
    z: &DenseMatrix,
    i: usize,
    a_self_norm: &SparseMatrix,
    a_sup: &SparseMatrix,
) -> f64 {
    pointwise_alignment(z, i, a_self_norm, a_sup)
}

/// `‖x_i − h_sup(x_i)‖ − ‖h_self(x_i) − h_sup(x_i)‖` with `h_G(x_i) = Σ_j g_ij x_j`:
/// how much one aggregation step moves `x_i` toward its true-class mean.
pub fn filter_impact(
    x: &DenseMatrix,
    i: usize,
    a_self_norm: &SparseMatrix,
    a_sup: &SparseMatrix,
) -> f64 {
    let agg = |a: &SparseMatrix| {
        let mut h = vec![0.0; x.cols()];
        let (idx, vals) = a.row(i);
        for (&j, &w) in idx.iter().zip(vals) {
            for (o, &v) in h.iter_mut().zip(x.row(j)) {
                *o += w * v;
            }
        }
        h
    };
    let h_sup = agg(a_sup);
    let h_self = agg(a_self_norm);
    let dist = |a: &[f64], b: &[f64]| crate::linalg::sq_dist(a, b).sqrt();
    dist(x.row(i), &h_sup) - dist(&h_self, &h_sup)
}
