//! Reconstruction pretraining and the joint clustering phase.
//!
//! The clustering phase optimizes `L_clus + γ·L_bce` for the discriminative
//! model and the reconstruction loss for the post-hoc models. With
//! `rethink` on, every `m1` epochs the reliable set Ω is re-selected from
//! the current assignments and every `m2` epochs the reconstruction target
//! is rewritten over Ω; the clustering loss only sees rows in Ω.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{
    dgae_clus_loss, kmeans_embed_grad, kmeans_embed_loss, laplacian_quadratic, recon_loss_grad,
    regularizer_r, vgae_kl_prior, KlReduction, ReconWeighting,
};
use super::{EncoderInput, GaeModel};
use crate::cluster::{
    evaluate_clustering, gaussian_soft_assign, hard_target, hungarian_map, kmeans_with,
    map_truth_to_pred, student_t_assign, ClusterModel, KMeansOptions, SoftAssignment,
};
use crate::diagnostics::{
    graph_evolution_stats, lambda_fd, lambda_fr, ClusteringObjective, DiagnosticTrace, EpochRecord,
};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::operators::{
    build_supervised_target, compute_centroid_nodes, upsilon_transform, xi_select_soft,
    CentroidNodes, ReliableSet, SelfSupervisionGraph, UpsilonOptions,
};

const PRETRAIN_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;

/// Switches for the ablation grid. The defaults run both operators fully.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorToggles {
    /// Off: thresholds forced to zero so Ω is every node, and no convergence stop.
    pub use_xi: bool,
    pub add_edges: bool,
    pub drop_edges: bool,
    /// Off: the reconstruction target stays the input graph.
    pub use_upsilon: bool,
    /// Rewrite the target once over all nodes at the start and never again.
    pub fd_protection_single_step: bool,
    /// Epochs trained as the baseline before either operator is applied.
    pub fr_correction_delay: usize,
}

impl Default for OperatorToggles {
    fn default() -> Self {
        Self {
            use_xi: true,
            add_edges: true,
            drop_edges: true,
            use_upsilon: true,
            fd_protection_single_step: false,
            fr_correction_delay: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lr: f64,
    pub pretrain_epochs: usize,
    pub train_epochs: usize,
    pub alpha1: f64,
    /// Defaults to `alpha1 / 2`.
    pub alpha2: Option<f64>,
    pub m1: usize,
    pub m2: usize,
    pub seed: u64,
    pub rethink: bool,
    /// Training stops once `|Ω| ≥ convergence_fraction · N`.
    pub convergence_fraction: f64,
    pub kl_reduction: KlReduction,
    /// Post-hoc models also descend the embedded k-means loss over Ω.
    pub first_group_clustering_loss: bool,
    /// Gradient-alignment metrics every this many epochs; 0 disables them.
    pub diagnostics_stride: usize,
    pub kmeans_n_init: usize,
    pub toggles: OperatorToggles,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.001,
            lr: 0.01,
            pretrain_epochs: 200,
            train_epochs: 200,
            alpha1: 0.3,
            alpha2: None,
            m1: 20,
            m2: 15,
            seed: 0,
            rethink: false,
            convergence_fraction: 0.9,
            kl_reduction: KlReduction::Sum,
            first_group_clustering_loss: false,
            diagnostics_stride: 1,
            kmeans_n_init: 10,
            toggles: OperatorToggles::default(),
        }
    }
}

impl TrainConfig {
    pub fn alpha2(&self) -> f64 {
        self.alpha2.unwrap_or(self.alpha1 / 2.0)
    }

    /// Thresholds actually handed to the sampler.
    pub fn effective_thresholds(&self) -> (f64, f64) {
        if self.toggles.use_xi {
            (self.alpha1, self.alpha2())
        } else {
            (0.0, 0.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.alpha1) {
            return bad(format!("alpha1 must lie in [0, 1], got {}", self.alpha1));
        }
        if !(0.0..=1.0).contains(&self.alpha2()) {
            return bad(format!("alpha2 must lie in [0, 1], got {}", self.alpha2()));
        }
        if self.m1 == 0 || self.m2 == 0 {
            return bad("m1 and m2 must be at least 1".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be finite and >= 0, got {}", self.gamma));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.convergence_fraction > 0.0 && self.convergence_fraction <= 1.0) {
            return bad(format!(
                "convergence_fraction must lie in (0, 1], got {}",
                self.convergence_fraction
            ));
        }
        if self.kmeans_n_init == 0 {
            return bad("kmeans_n_init must be at least 1".into());
        }
        Ok(())
    }

    fn kmeans_options(&self) -> KMeansOptions {
        KMeansOptions {
            n_init: self.kmeans_n_init,
            ..KMeansOptions::default()
        }
    }
}

/// Loss terms at one epoch. The decomposition terms are evaluated on the
/// deterministic embedding against the current reconstruction target, and
/// only on diagnostic epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_total: f64,
    pub l_clus: Option<f64>,
    /// Weighted reconstruction loss (plus the prior term for the VGAE).
    pub l_bce: f64,
    pub l_c_self: Option<f64>,
    pub l_r_self: Option<f64>,
    pub l_c_clus: Option<f64>,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    /// Loss before each update, so `losses[0]` is the untrained loss.
    pub losses: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EpochCap,
    OmegaConverged,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub trace: DiagnosticTrace,
    pub stop_reason: StopReason,
    /// Cluster of every node after the last update.
    pub labels: Vec<usize>,
    /// Reconstruction target in use at the end.
    pub final_graph: SelfSupervisionGraph,
    pub final_omega: ReliableSet,
    /// Centroid nodes of the last rewrite, if any rewrite ran.
    pub final_centroids: Option<CentroidNodes>,
    /// `|Ω|` after each sampler update, in order.
    pub omega_history: Vec<usize>,
    pub epochs_run: usize,
    /// Clustering-phase time excluding diagnostics.
    pub wall_time: Duration,
}

/// Reconstruction step on `target`: loss and θ-gradient.
fn recon_step(
    model: &GaeModel,
    input: &EncoderInput,
    target: &SparseMatrix,
    rng: &mut ChaCha8Rng,
    extra_grad_z: Option<(&DenseMatrix, f64)>,
) -> Result<(f64, super::ThetaGrad, DenseMatrix)> {
    let (z, cache) = model.encode_train(input, rng)?;
    let (mut loss, mut gz) = recon_loss_grad(&z, target, ReconWeighting::PosWeighted)?;
    if let Some((g, w)) = extra_grad_z {
        gz.scale(w);
        gz.axpy(1.0, g)?;
        loss *= w;
    }
    let grad = match cache.logstd() {
        Some(ls) => {
            let prior = vgae_kl_prior(cache.mu(), ls)?;
            loss += prior.kl;
            model.backprop_theta_with(
                input,
                &cache,
                &gz,
                Some(&prior.grad_mu),
                Some(&prior.grad_logstd),
            )?
        }
        None => model.backprop_theta(input, &cache, &gz)?,
    };
    Ok((loss, grad, z))
}

fn check_finite(loss: f64, epoch: usize, phase: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Training(format!(
            "{phase} loss diverged at epoch {epoch}"
        )))
    }
}

/// Full-batch Adam on the weighted reconstruction loss of `target`.
pub fn pretrain(
    model: &mut GaeModel,
    input: &EncoderInput,
    target: &SparseMatrix,
    cfg: &TrainConfig,
) -> Result<PretrainReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(PRETRAIN_STREAM);
    let mut losses = Vec::with_capacity(cfg.pretrain_epochs);
    for epoch in 0..cfg.pretrain_epochs {
        let (loss, grad, _) = recon_step(model, input, target, &mut rng, None)?;
        check_finite(loss, epoch, "pretraining")?;
        losses.push(loss);
        model
            .apply_gradients(&grad, None, cfg.lr)
            .map_err(|e| Error::Training(format!("pretraining epoch {epoch}: {e}")))?;
    }
    Ok(PretrainReport { losses })
}

/// Current assignments and the scores the sampler reads.
struct Assignments {
    labels: Vec<usize>,
    /// Row-stochastic confidence used by the sampler.
    soft: SoftAssignment,
}

fn dgae_assignments(z: &DenseMatrix, model: &GaeModel) -> Result<Assignments> {
    let centers = model
        .centers()
        .ok_or_else(|| Error::State("discriminative model has no centers".into()))?;
    let soft = student_t_assign(z, centers)?;
    Ok(Assignments {
        labels: soft.labels(),
        soft,
    })
}

fn kmeans_assignments(
    z: &DenseMatrix,
    cm: &ClusterModel,
    labels: Vec<usize>,
) -> Result<Assignments> {
    Ok(Assignments {
        labels,
        soft: gaussian_soft_assign(z, cm)?,
    })
}

fn subset_acc(pred: &[usize], truth: &[usize], rows: &[usize], k: usize) -> Result<Option<f64>> {
    if rows.is_empty() {
        return Ok(None);
    }
    let p: Vec<usize> = rows.iter().map(|&i| pred[i]).collect();
    let t: Vec<usize> = rows.iter().map(|&i| truth[i]).collect();
    Ok(Some(evaluate_clustering(&p, &t, k)?.acc))
}

/// Runs the clustering phase on a pretrained model.
///
/// Cluster centers (discriminative model) or the k-means model (post-hoc
/// models) are initialized by k-means on the current embedding, and the
/// optimizer restarts.
pub fn train_joint(
    model: &mut GaeModel,
    input: &EncoderInput,
    graph: &AttributedGraph,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = graph.n_nodes();
    let k = graph.k_clusters();
    if input.n_nodes() != n {
        return Err(Error::Shape(format!(
            "encoder input has {} nodes, graph {n}",
            input.n_nodes()
        )));
    }
    let edges = graph.edges();
    let a = graph.adjacency();
    let truth = graph.labels();
    let post_hoc = model.arch().clusters_post_hoc();
    let (alpha1, alpha2) = cfg.effective_thresholds();
    let toggles = cfg.toggles;
    let kopts = cfg.kmeans_options();
    let upsilon_opts = UpsilonOptions {
        add_edges: toggles.add_edges,
        drop_edges: toggles.drop_edges,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(TRAIN_STREAM);

    let clock = Instant::now();
    let mut diag_time = Duration::ZERO;

    let (z0, _) = model.encode(input)?;
    let init = kmeans_with(&z0, k, cfg.seed, &kopts)?;
    if post_hoc {
        model.reset_optimizer();
    } else {
        model.set_centers(Some(init.model.centers().clone()))?;
    }
    let mut cluster_model = init.model;
    let mut km_labels = init.labels;

    let mut omega = ReliableSet::all(n);
    let mut a_cs = SelfSupervisionGraph::identity(n, edges);
    let mut target = a.clone();
    let mut omega_history = Vec::new();
    let mut centroids = None;
    let mut trace = DiagnosticTrace::default();
    let mut stop_reason = StopReason::EpochCap;
    let mut epochs_run = 0;

    if cfg.rethink && toggles.fd_protection_single_step {
        let asg = if post_hoc {
            kmeans_assignments(&z0, &cluster_model, km_labels.clone())?
        } else {
            dgae_assignments(&z0, model)?
        };
        let all: Vec<usize> = (0..n).collect();
        let pi = compute_centroid_nodes(&z0, &asg.labels, &all, k)?;
        a_cs = upsilon_transform(n, edges, &asg.labels, &all, &pi, upsilon_opts)?;
        target = a_cs.adjacency();
        centroids = Some(pi);
    }

    for epoch in 0..cfg.train_epochs {
        let active = cfg.rethink
            && !toggles.fd_protection_single_step
            && epoch >= toggles.fr_correction_delay;
        let since = epoch.saturating_sub(toggles.fr_correction_delay);
        let (z_eval, _) = model.encode(input)?;

        let refresh = if active {
            since % cfg.m1 == 0
        } else {
            epoch % cfg.m1 == 0
        };
        if post_hoc && refresh && epoch > 0 {
            let km = kmeans_with(&z_eval, k, cfg.seed, &kopts)?;
            cluster_model = km.model;
            km_labels = km.labels;
        }
        let asg = if post_hoc {
            kmeans_assignments(&z_eval, &cluster_model, km_labels.clone())?
        } else {
            dgae_assignments(&z_eval, model)?
        };

        let mut converged = false;
        if active && since % cfg.m1 == 0 {
            omega = xi_select_soft(asg.soft.matrix(), alpha1, alpha2)?;
            omega_history.push(omega.len());
            log::debug!("epoch {epoch}: |Ω| = {} of {n}", omega.len());
            // The first update only seeds Ω; stopping needs at least one
            // interval trained under the operators.
            converged = toggles.use_xi
                && since > 0
                && omega.len() as f64 >= cfg.convergence_fraction * n as f64;
        }
        // A converged sampler still gets its rewrite, so the returned graph
        // matches the returned Ω.
        if active && toggles.use_upsilon && (converged || since % cfg.m2 == 0) {
            a_cs = if omega.is_empty() {
                centroids = None;
                SelfSupervisionGraph::identity(n, edges)
            } else {
                let pi = compute_centroid_nodes(&z_eval, &asg.labels, &omega.omega, k)?;
                let g = upsilon_transform(n, edges, &asg.labels, &omega.omega, &pi, upsilon_opts)?;
                centroids = Some(pi);
                g
            };
            target = a_cs.adjacency();
        }
        if converged {
            stop_reason = StopReason::OmegaConverged;
            break;
        }
        let rows: Option<&[usize]> = if active { Some(&omega.omega) } else { None };
        let clus_rows = rows.map_or(n, <[usize]>::len);

        // Loss and gradients at the current parameters.
        let mut l_clus = None;
        let (l_total, l_bce, grad, grad_centers) = if post_hoc {
            if cfg.first_group_clustering_loss && clus_rows > 0 {
                let (z, cache) = model.encode_train(input, &mut rng)?;
                let lc = kmeans_embed_loss(&z, &asg.labels, k, rows)?;
                let gc = kmeans_embed_grad(&z, &asg.labels, k, rows)?;
                let (lb, mut gz) = recon_loss_grad(&z, &target, ReconWeighting::PosWeighted)?;
                gz.scale(cfg.gamma);
                gz.axpy(1.0, &gc)?;
                let (lb, grad) = match cache.logstd() {
                    Some(ls) => {
                        let prior = vgae_kl_prior(cache.mu(), ls)?;
                        let gm = prior.grad_mu.scaled(cfg.gamma);
                        let gl = prior.grad_logstd.scaled(cfg.gamma);
                        (
                            lb + prior.kl,
                            model.backprop_theta_with(input, &cache, &gz, Some(&gm), Some(&gl))?,
                        )
                    }
                    None => (lb, model.backprop_theta(input, &cache, &gz)?),
                };
                l_clus = Some(lc);
                (lc + cfg.gamma * lb, lb, grad, None)
            } else {
                let (lb, grad, _) = recon_step(model, input, &target, &mut rng, None)?;
                (lb, lb, grad, None)
            }
        } else {
            let centers = model.centers().expect("set before the loop").clone();
            let (z, cache) = model.encode_train(input, &mut rng)?;
            let (lb, mut gz) = recon_loss_grad(&z, &target, ReconWeighting::PosWeighted)?;
            gz.scale(cfg.gamma);
            let mut gc = DenseMatrix::zeros(centers.rows(), centers.cols());
            let mut total = cfg.gamma * lb;
            if clus_rows > 0 {
                let q = hard_target(&asg.soft);
                let kl = dgae_clus_loss(&z, &centers, &q, rows, cfg.kl_reduction)?;
                gz.axpy(1.0, &kl.grad_z)?;
                gc = kl.grad_centers;
                total += kl.loss;
                l_clus = Some(kl.loss);
            }
            (
                total,
                lb,
                model.backprop_theta(input, &cache, &gz)?,
                Some(gc),
            )
        };
        check_finite(l_total, epoch, "clustering")?;

        let diag_start = Instant::now();
        let mut rec = EpochRecord {
            epoch,
            lambda_fr: None,
            lambda_fr_baseline: None,
            lambda_fd: None,
            lambda_fd_baseline: None,
            omega_size: omega.len(),
            acc_all: None,
            acc_omega: None,
            acc_complement: None,
            nmi: None,
            ari: None,
            links: None,
            loss: LossBreakdown {
                l_total,
                l_clus,
                l_bce,
                l_c_self: None,
                l_r_self: None,
                l_c_clus: None,
                gamma: cfg.gamma,
            },
            wall_time: 0.0,
        };
        if let Some(truth) = truth {
            let s = evaluate_clustering(&asg.labels, truth, k)?;
            rec.acc_all = Some(s.acc);
            rec.nmi = Some(s.nmi);
            rec.ari = Some(s.ari);
            if active {
                rec.acc_omega = subset_acc(&asg.labels, truth, &omega.omega, k)?;
                rec.acc_complement = subset_acc(&asg.labels, truth, &omega.complement(), k)?;
            }
            rec.links = Some(graph_evolution_stats(&a_cs, truth)?);
        }
        if cfg.diagnostics_stride > 0 && epoch % cfg.diagnostics_stride == 0 {
            rec.loss.l_c_self = Some(laplacian_quadratic(&z_eval, &target)?);
            rec.loss.l_r_self = Some(regularizer_r(&z_eval, &target)?);
            rec.loss.l_c_clus = Some(kmeans_embed_loss(&z_eval, &asg.labels, k, None)?);
            if let Some(truth) = truth {
                let objective = ClusteringObjective::for_model(model);
                rec.lambda_fr =
                    Some(lambda_fr(model, input, objective, &asg.labels, rows, truth, k)?.value);
                rec.lambda_fr_baseline =
                    Some(lambda_fr(model, input, objective, &asg.labels, None, truth, k)?.value);
                let pi = hungarian_map(truth, &asg.labels, k)?;
                let mapped = map_truth_to_pred(truth, &pi);
                let sup = build_supervised_target(n, edges, &mapped, &z_eval, k)?.adjacency();
                rec.lambda_fd = Some(lambda_fd(model, input, &target, &sup)?.value);
                rec.lambda_fd_baseline = Some(lambda_fd(model, input, &a, &sup)?.value);
            }
        }
        diag_time += diag_start.elapsed();

        model
            .apply_gradients(&grad, grad_centers.as_ref(), cfg.lr)
            .map_err(|e| Error::Training(format!("clustering epoch {epoch}: {e}")))?;
        rec.wall_time = (clock.elapsed() - diag_time).as_secs_f64();
        trace.push(rec);
        epochs_run = epoch + 1;
    }

    let (z, _) = model.encode(input)?;
    let labels = if post_hoc {
        kmeans_with(&z, k, cfg.seed, &kopts)?.labels
    } else {
        dgae_assignments(&z, model)?.labels
    };
    Ok(TrainOutcome {
        trace,
        stop_reason,
        labels,
        final_graph: a_cs,
        final_omega: omega,
        final_centroids: centroids,
        omega_history,
        epochs_run,
        wall_time: clock.elapsed() - diag_time,
    })
}
