//! Executable checks of the loss identities and closed-form gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{build_cluster_graph, hard_target, student_t_assign};
use crate::error::Result;
use crate::graph::AttributedGraph;
use crate::linalg::{finite_diff_grad, DenseMatrix, SparseMatrix};
use crate::model::losses::{
    dgae_clus_loss, kmeans_embed_grad, kmeans_embed_loss, laplacian_quadratic,
    laplacian_quadratic_grad, recon_loss, recon_loss_grad, regularizer_r, vgae_kl_prior,
};
use crate::model::{Arch, EncoderInput, GaeModel, KlReduction, ReconWeighting};

/// Relative residuals of the three loss identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Cross-entropy versus Laplacian term plus remainder.
    pub prop1_rel: f64,
    /// Centroid k-means versus the Laplacian form on the cluster graph.
    pub prop2_rel: f64,
    /// Combined clustering-plus-reconstruction objective versus its
    /// single-graph rewrite.
    pub thm1_rel: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.prop1_rel.max(self.prop2_rel).max(self.thm1_rel)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Evaluates each identity through two independent code paths.
pub fn decomposition_residuals(
    z: &DenseMatrix,
    a_self: &SparseMatrix,
    labels_pred: &[usize],
    k: usize,
    gamma: f64,
) -> Result<Residuals> {
    let bce = recon_loss(z, a_self, ReconWeighting::Plain)?;
    let l_c_self = laplacian_quadratic(z, a_self)?;
    let l_r_self = regularizer_r(z, a_self)?;
    let prop1_rel = rel(bce, l_c_self + l_r_self);

    let centroid = kmeans_embed_loss(z, labels_pred, k, None)?;
    let a_clus = build_cluster_graph(labels_pred, k)?;
    let l_c_clus = laplacian_quadratic(z, &a_clus)?;
    let prop2_rel = rel(centroid, l_c_clus);

    let combined_graph = a_clus.add_scaled(gamma, a_self)?;
    let lhs = centroid + gamma * bce;
    let rhs = laplacian_quadratic(z, &combined_graph)? + gamma * l_r_self;
    let thm1_rel = rel(lhs, rhs);
    Ok(Residuals {
        prop1_rel,
        prop2_rel,
        thm1_rel,
    })
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0))
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                e.push((u, v));
            }
        }
    }
    e
}

fn symmetric_binary(n: usize, edges: &[(usize, usize)]) -> SparseMatrix {
    let trip = edges
        .iter()
        .flat_map(|&(u, v)| [(u, v, 1.0), (v, u, 1.0)])
        .collect();
    SparseMatrix::from_triplets(n, n, trip).expect("edges in range")
}

/// Labels covering all `k` clusters (requires `n ≥ k`).
fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut l: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    for i in (1..n).rev() {
        l.swap(i, rng.random_range(0..=i));
    }
    l
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub instances: usize,
    pub max_prop1_rel: f64,
    pub max_prop2_rel: f64,
    pub max_thm1_rel: f64,
}

/// Residuals over `instances` random `(Z, A, labels, γ)` with N ≤ 30,
/// d ≤ 8, K ≤ 5.
pub fn identity_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        instances,
        max_prop1_rel: 0.0,
        max_prop2_rel: 0.0,
        max_thm1_rel: 0.0,
    };
    for _ in 0..instances {
        let n = rng.random_range(2..=30);
        let d = rng.random_range(1..=8);
        let k = rng.random_range(1..=5.min(n));
        let scale = rng.random_range(0.1..2.0);
        let z = random_matrix(&mut rng, n, d, scale);
        let p = rng.random_range(0.05..0.6);
        let a = symmetric_binary(n, &random_edges(&mut rng, n, p));
        let labels = random_labels(&mut rng, n, k);
        let gamma = rng.random_range(0.0..1.0);
        let r = decomposition_residuals(&z, &a, &labels, k, gamma)?;
        report.max_prop1_rel = report.max_prop1_rel.max(r.prop1_rel);
        report.max_prop2_rel = report.max_prop2_rel.max(r.prop2_rel);
        report.max_thm1_rel = report.max_thm1_rel.max(r.thm1_rel);
    }
    Ok(report)
}

/// Agreement between a closed-form gradient and central differences.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradientCheck {
    pub name: String,
    /// `‖analytic − numeric‖ / max(‖numeric‖, 1e-8)`, worst over instances.
    pub rel_err: f64,
}

fn rel_err(analytic: &DenseMatrix, numeric: &DenseMatrix) -> f64 {
    let diff = analytic.sub(numeric).expect("same shape").frobenius_norm();
    diff / numeric.frobenius_norm().max(1e-8)
}

const FD_STEP: f64 = 1e-5;

fn small_graph(rng: &mut ChaCha8Rng, n: usize, j: usize) -> AttributedGraph {
    let edges = random_edges(rng, n, 0.35);
    let x = random_matrix(rng, n, j, 1.0);
    AttributedGraph::new("probe", n, edges, x, None, 2).expect("valid random graph")
}

type LossAndGrad<'a> = &'a dyn Fn(&GaeModel) -> Result<(f64, Vec<f64>)>;

fn theta_check(model: &GaeModel, loss_and_grad: LossAndGrad<'_>) -> Result<f64> {
    let (_, analytic) = loss_and_grad(model)?;
    let theta = DenseMatrix::from_vec(1, model.n_theta(), model.theta())?;
    let numeric = finite_diff_grad(
        |t| {
            let mut m = model.clone();
            m.set_theta(t.data()).expect("same length");
            loss_and_grad(&m).map(|r| r.0).unwrap_or(f64::NAN)
        },
        &theta,
        FD_STEP,
    )?;
    Ok(rel_err(
        &DenseMatrix::from_vec(1, analytic.len(), analytic)?,
        &numeric,
    ))
}

/// Closed-form gradients against central differences on random instances
/// with N ≤ 10.
pub fn gradient_suite(instances: usize, seed: u64) -> Result<Vec<GradientCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut record = |name: &str, e: f64| match worst.iter_mut().find(|w| w.0 == name) {
        Some(w) => w.1 = w.1.max(e),
        None => worst.push((name.to_string(), e)),
    };
    for _ in 0..instances {
        let n = rng.random_range(3..=10);
        let d = rng.random_range(1..=4);
        let z = random_matrix(&mut rng, n, d, 1.0);
        let a = symmetric_binary(n, &random_edges(&mut rng, n, 0.4));

        let num = finite_diff_grad(
            |m| recon_loss(m, &a, ReconWeighting::Plain).unwrap(),
            &z,
            FD_STEP,
        )?;
        record(
            "recon_plain_z",
            rel_err(&recon_loss_grad(&z, &a, ReconWeighting::Plain)?.1, &num),
        );

        let num = finite_diff_grad(
            |m| recon_loss(m, &a, ReconWeighting::PosWeighted).unwrap(),
            &z,
            FD_STEP,
        )?;
        record(
            "recon_pos_weighted_z",
            rel_err(
                &recon_loss_grad(&z, &a, ReconWeighting::PosWeighted)?.1,
                &num,
            ),
        );

        let k = rng.random_range(1..=3.min(n));
        let labels = random_labels(&mut rng, n, k);
        let a_clus = build_cluster_graph(&labels, k)?;
        let num = finite_diff_grad(|m| laplacian_quadratic(m, &a_clus).unwrap(), &z, FD_STEP)?;
        record(
            "laplacian_clus_z",
            rel_err(&laplacian_quadratic_grad(&z, &a_clus)?, &num),
        );
        let num = finite_diff_grad(
            |m| kmeans_embed_loss(m, &labels, k, None).unwrap(),
            &z,
            FD_STEP,
        )?;
        record(
            "kmeans_centroid_z",
            rel_err(&kmeans_embed_grad(&z, &labels, k, None)?, &num),
        );

        let k2 = rng.random_range(2..=3);
        let centers = random_matrix(&mut rng, k2, d, 1.0);
        let q = hard_target(&student_t_assign(&z, &centers)?);
        let rows: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.7).collect();
        let kl = dgae_clus_loss(&z, &centers, &q, Some(&rows), KlReduction::Mean)?;
        let num = finite_diff_grad(
            |m| {
                dgae_clus_loss(m, &centers, &q, Some(&rows), KlReduction::Mean)
                    .unwrap()
                    .loss
            },
            &z,
            FD_STEP,
        )?;
        record("kl_student_t_z", rel_err(&kl.grad_z, &num));
        let num = finite_diff_grad(
            |c| {
                dgae_clus_loss(&z, c, &q, Some(&rows), KlReduction::Mean)
                    .unwrap()
                    .loss
            },
            &centers,
            FD_STEP,
        )?;
        record("kl_student_t_centers", rel_err(&kl.grad_centers, &num));

        let mu = random_matrix(&mut rng, n, d, 1.0);
        let ls = random_matrix(&mut rng, n, d, 0.5);
        let prior = vgae_kl_prior(&mu, &ls)?;
        let num = finite_diff_grad(|m| vgae_kl_prior(m, &ls).unwrap().kl, &mu, FD_STEP)?;
        record("vgae_prior_mu", rel_err(&prior.grad_mu, &num));
        let num = finite_diff_grad(|l| vgae_kl_prior(&mu, l).unwrap().kl, &ls, FD_STEP)?;
        record("vgae_prior_logstd", rel_err(&prior.grad_logstd, &num));

        // Full chain rule through the encoder.
        let j = rng.random_range(2..=5);
        let graph = small_graph(&mut rng, n, j);
        let input = EncoderInput::new(&graph);
        let target = graph.adjacency();
        let gae = GaeModel::new(Arch::Gae, graph.n_features(), 4, 3, rng.random());
        let e = theta_check(&gae, &|m| {
            let (z, cache) = m.encode(&input)?;
            let (l, gz) = recon_loss_grad(&z, &target, ReconWeighting::Plain)?;
            Ok((l, m.backprop_theta(&input, &cache, &gz)?.flatten()))
        })?;
        record("theta_gae_recon_plain", e);

        let vgae = GaeModel::new(Arch::Vgae, graph.n_features(), 4, 3, rng.random());
        let noise_seed: u64 = rng.random();
        let e = theta_check(&vgae, &|m| {
            let mut r = ChaCha8Rng::seed_from_u64(noise_seed);
            let (z, cache) = m.encode_train(&input, &mut r)?;
            let (l, gz) = recon_loss_grad(&z, &target, ReconWeighting::PosWeighted)?;
            let prior = vgae_kl_prior(cache.mu(), cache.logstd().expect("variational"))?;
            let g = m.backprop_theta_with(
                &input,
                &cache,
                &gz,
                Some(&prior.grad_mu),
                Some(&prior.grad_logstd),
            )?;
            Ok((l + prior.kl, g.flatten()))
        })?;
        record("theta_vgae_elbo", e);

        let mut dgae = GaeModel::new(Arch::Dgae, graph.n_features(), 4, 3, rng.random());
        dgae.set_centers(Some(random_matrix(&mut rng, 2, 3, 1.0)))?;
        let (z0, _) = dgae.encode(&input)?;
        let q = hard_target(&student_t_assign(&z0, dgae.centers().expect("set"))?);
        let gamma = 0.3;
        let e = theta_check(&dgae, &|m| {
            let (z, cache) = m.encode(&input)?;
            let kl = dgae_clus_loss(&z, m.centers().expect("set"), &q, None, KlReduction::Sum)?;
            let (l, mut gz) = recon_loss_grad(&z, &target, ReconWeighting::PosWeighted)?;
            gz.scale(gamma);
            gz.axpy(1.0, &kl.grad_z)?;
            Ok((
                kl.loss + gamma * l,
                m.backprop_theta(&input, &cache, &gz)?.flatten(),
            ))
        })?;
        record("theta_dgae_total", e);
    }
    Ok(worst
        .into_iter()
        .map(|(name, rel_err)| GradientCheck { name, rel_err })
        .collect())
}
