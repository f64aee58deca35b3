use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, AdjacencyMode, AttributedGraph, NormalizedAdjacency};
use crate::linalg::{AdamState, DenseMatrix, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Gae,
    Vgae,
    Dgae,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Gae => "gae",
            Arch::Vgae => "vgae",
            Arch::Dgae => "dgae",
        }
    }

    /// Models whose clustering is a separate k-means step on the embedding.
    pub fn clusters_post_hoc(self) -> bool {
        matches!(self, Arch::Gae | Arch::Vgae)
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gae" => Ok(Arch::Gae),
            "vgae" => Ok(Arch::Vgae),
            "dgae" => Ok(Arch::Dgae),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

/// Propagation matrix and features in the sparse forms the encoder needs.
#[derive(Clone, Debug)]
pub struct EncoderInput {
    a_prop: SparseMatrix,
    x: SparseMatrix,
    xt: SparseMatrix,
}

impl EncoderInput {
    pub fn new(graph: &AttributedGraph) -> Self {
        let a = normalize_adjacency(graph, AdjacencyMode::Propagation);
        Self::from_parts(&a, graph.features()).expect("graph parts are consistent")
    }

    pub fn from_parts(a_prop: &NormalizedAdjacency, features: &DenseMatrix) -> Result<Self> {
        if a_prop.mode != AdjacencyMode::Propagation {
            return Err(Error::State(
                "encoder needs the propagation-mode adjacency".into(),
            ));
        }
        if a_prop.matrix.rows() != features.rows() {
            return Err(Error::Shape(format!(
                "{} nodes vs {} feature rows",
                a_prop.matrix.rows(),
                features.rows()
            )));
        }
        let x = SparseMatrix::from_dense(features);
        let xt = x.transpose();
        Ok(Self {
            a_prop: a_prop.matrix.clone(),
            x,
            xt,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.a_prop.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn propagation(&self) -> &SparseMatrix {
        &self.a_prop
    }
}

/// Gradients of the encoder weights θ.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaGrad {
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
    pub w2_logstd: Option<DenseMatrix>,
}

impl ThetaGrad {
    /// `[W1, W2, W2_logstd]`, each row-major.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(self.w1.data());
        v.extend_from_slice(self.w2.data());
        if let Some(w) = &self.w2_logstd {
            v.extend_from_slice(w.data());
        }
        v
    }

    pub fn len(&self) -> usize {
        self.w1.data().len()
            + self.w2.data().len()
            + self.w2_logstd.as_ref().map_or(0, |w| w.data().len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Intermediate activations of one forward pass.
#[derive(Clone, Debug)]
pub struct EncodeCache {
    version: u64,
    pre1: DenseMatrix,
    /// `Ã · ReLU(pre1)`, the input of the second layer's weight product.
    ah: DenseMatrix,
    mu: DenseMatrix,
    logstd: Option<DenseMatrix>,
    eps: Option<DenseMatrix>,
}

impl EncodeCache {
    pub fn mu(&self) -> &DenseMatrix {
        &self.mu
    }

    pub fn logstd(&self) -> Option<&DenseMatrix> {
        self.logstd.as_ref()
    }
}

/// Two-layer GCN encoder `Z = Ã ReLU(Ã X W1) W2` with an optional log-std
/// head (VGAE) and optional cluster centers (DGAE).
#[derive(Clone, Debug, PartialEq)]
pub struct GaeModel {
    arch: Arch,
    seed: u64,
    w1: DenseMatrix,
    w2: DenseMatrix,
    w2_logstd: Option<DenseMatrix>,
    centers: Option<DenseMatrix>,
    adam: Option<AdamState>,
    version: u64,
}

pub const DEFAULT_HIDDEN: usize = 32;
pub const DEFAULT_EMBED: usize = 16;

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-r..r))
}

impl GaeModel {
    /// Glorot-uniform weights drawn from `seed`.
    pub fn new(arch: Arch, n_features: usize, hidden: usize, embed: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = glorot(n_features, hidden, &mut rng);
        let w2 = glorot(hidden, embed, &mut rng);
        let w2_logstd = (arch == Arch::Vgae).then(|| glorot(hidden, embed, &mut rng));
        Self {
            arch,
            seed,
            w1,
            w2,
            w2_logstd,
            centers: None,
            adam: None,
            version: 0,
        }
    }

    pub fn with_default_dims(arch: Arch, n_features: usize, seed: u64) -> Self {
        Self::new(arch, n_features, DEFAULT_HIDDEN, DEFAULT_EMBED, seed)
    }

    pub(crate) fn from_parts(
        arch: Arch,
        seed: u64,
        w1: DenseMatrix,
        w2: DenseMatrix,
        w2_logstd: Option<DenseMatrix>,
        centers: Option<DenseMatrix>,
        adam: Option<AdamState>,
    ) -> Result<Self> {
        if w1.cols() != w2.rows() {
            return Err(Error::Shape(format!(
                "W1 {:?} vs W2 {:?}",
                w1.shape(),
                w2.shape()
            )));
        }
        if (arch == Arch::Vgae) != w2_logstd.is_some() {
            return Err(Error::State(
                "log-std head present iff the model is variational".into(),
            ));
        }
        if let Some(w) = &w2_logstd {
            if w.shape() != w2.shape() {
                return Err(Error::Shape("log-std head shape differs from W2".into()));
            }
        }
        if let Some(c) = &centers {
            if c.cols() != w2.cols() {
                return Err(Error::Shape(
                    "center dimension differs from embedding".into(),
                ));
            }
        }
        let mut m = Self {
            arch,
            seed,
            w1,
            w2,
            w2_logstd,
            centers,
            adam: None,
            version: 0,
        };
        if let Some(a) = adam {
            if a.len() != m.n_params() {
                return Err(Error::Shape(format!(
                    "optimizer tracks {} parameters, model has {}",
                    a.len(),
                    m.n_params()
                )));
            }
            m.adam = Some(a);
        }
        Ok(m)
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn w1(&self) -> &DenseMatrix {
        &self.w1
    }

    pub fn w2(&self) -> &DenseMatrix {
        &self.w2
    }

    pub fn w2_logstd(&self) -> Option<&DenseMatrix> {
        self.w2_logstd.as_ref()
    }

    pub fn centers(&self) -> Option<&DenseMatrix> {
        self.centers.as_ref()
    }

    pub fn adam(&self) -> Option<&AdamState> {
        self.adam.as_ref()
    }

    pub fn n_features(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn embed_dim(&self) -> usize {
        self.w2.cols()
    }

    /// Bumped on every parameter change; caches from older versions are rejected.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Replaces the cluster centers and drops optimizer state.
    pub fn set_centers(&mut self, centers: Option<DenseMatrix>) -> Result<()> {
        if let Some(c) = &centers {
            if c.cols() != self.embed_dim() {
                return Err(Error::Shape(format!(
                    "centers of dim {} for a {}-dim embedding",
                    c.cols(),
                    self.embed_dim()
                )));
            }
        }
        self.centers = centers;
        self.adam = None;
        self.version += 1;
        Ok(())
    }

    pub fn n_theta(&self) -> usize {
        self.w1.data().len()
            + self.w2.data().len()
            + self.w2_logstd.as_ref().map_or(0, |w| w.data().len())
    }

    /// Encoder weights plus centers.
    pub fn n_params(&self) -> usize {
        self.n_theta() + self.centers.as_ref().map_or(0, |c| c.data().len())
    }

    /// Flattened θ in the order used by [`ThetaGrad::flatten`].
    pub fn theta(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_theta());
        v.extend_from_slice(self.w1.data());
        v.extend_from_slice(self.w2.data());
        if let Some(w) = &self.w2_logstd {
            v.extend_from_slice(w.data());
        }
        v
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_theta() {
            return Err(Error::Shape(format!(
                "{} values for {} encoder weights",
                theta.len(),
                self.n_theta()
            )));
        }
        let (a, rest) = theta.split_at(self.w1.data().len());
        let (b, c) = rest.split_at(self.w2.data().len());
        self.w1.data_mut().copy_from_slice(a);
        self.w2.data_mut().copy_from_slice(b);
        if let Some(w) = &mut self.w2_logstd {
            w.data_mut().copy_from_slice(c);
        }
        self.version += 1;
        Ok(())
    }

    /// Drops the optimizer moments; the next step starts a fresh Adam run.
    pub fn reset_optimizer(&mut self) {
        self.adam = None;
    }

    /// One Adam step over θ and, when given, the centers.
    pub fn apply_gradients(
        &mut self,
        grad: &ThetaGrad,
        grad_centers: Option<&DenseMatrix>,
        lr: f64,
    ) -> Result<()> {
        let mut g = grad.flatten();
        if g.len() != self.n_theta() {
            return Err(Error::Shape(
                "gradient does not match encoder weights".into(),
            ));
        }
        match (&self.centers, grad_centers) {
            (Some(c), Some(gc)) if gc.shape() == c.shape() => g.extend_from_slice(gc.data()),
            (Some(c), None) => g.extend(std::iter::repeat_n(0.0, c.data().len())),
            (None, None) => {}
            _ => {
                return Err(Error::Shape(
                    "center gradient does not match centers".into(),
                ))
            }
        }
        let n_params = self.n_params();
        let mut adam = self
            .adam
            .take()
            .unwrap_or_else(|| AdamState::new(n_params, lr));
        let mut params = self.theta();
        if let Some(c) = &self.centers {
            params.extend_from_slice(c.data());
        }
        let stepped = adam.step(&mut params, &g);
        self.adam = Some(adam);
        stepped?;
        let n_theta = self.n_theta();
        self.set_theta(&params[..n_theta])?;
        if let Some(c) = &mut self.centers {
            c.data_mut().copy_from_slice(&params[n_theta..]);
        }
        Ok(())
    }

    fn check_input(&self, input: &EncoderInput) -> Result<()> {
        if input.n_features() != self.n_features() {
            return Err(Error::State(format!(
                "model expects {} features, graph has {}",
                self.n_features(),
                input.n_features()
            )));
        }
        Ok(())
    }

    /// Deterministic forward pass; the VGAE returns its mean head.
    pub fn encode(&self, input: &EncoderInput) -> Result<(DenseMatrix, EncodeCache)> {
        self.forward(input, None)
    }

    /// Training forward pass: the VGAE draws `Z = μ + σ ⊙ ε` from `rng`;
    /// other architectures match [`GaeModel::encode`].
    pub fn encode_train(
        &self,
        input: &EncoderInput,
        rng: &mut ChaCha8Rng,
    ) -> Result<(DenseMatrix, EncodeCache)> {
        self.forward(input, Some(rng))
    }

    fn forward(
        &self,
        input: &EncoderInput,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(DenseMatrix, EncodeCache)> {
        self.check_input(input)?;
        let a = &input.a_prop;
        let pre1 = a.spmm(&input.x.spmm(&self.w1)?)?;
        let h = pre1.map(|v| v.max(0.0));
        let ah = a.spmm(&h)?;
        let mu = ah.matmul(&self.w2)?;
        let logstd = match &self.w2_logstd {
            Some(w) => Some(ah.matmul(w)?),
            None => None,
        };
        let (z, eps) = match (&logstd, rng) {
            (Some(ls), Some(rng)) => {
                let eps =
                    DenseMatrix::from_fn(mu.rows(), mu.cols(), |_, _| rng.sample(StandardNormal));
                let mut z = mu.clone();
                for ((zv, &e), &l) in z.data_mut().iter_mut().zip(eps.data()).zip(ls.data()) {
                    *zv += e * l.exp();
                }
                (z, Some(eps))
            }
            _ => (mu.clone(), None),
        };
        if !z.is_finite() {
            return Err(Error::Numerics(
                "encoder produced non-finite embeddings".into(),
            ));
        }
        Ok((
            z,
            EncodeCache {
                version: self.version,
                pre1,
                ah,
                mu,
                logstd,
                eps,
            },
        ))
    }

    /// Chain rule from `∂L/∂Z` back to θ.
    pub fn backprop_theta(
        &self,
        input: &EncoderInput,
        cache: &EncodeCache,
        grad_z: &DenseMatrix,
    ) -> Result<ThetaGrad> {
        self.backprop_theta_with(input, cache, grad_z, None, None)
    }

    /// Like [`GaeModel::backprop_theta`], with extra gradients flowing into
    /// the VGAE mean and log-std heads directly (e.g. from the prior term).
    pub fn backprop_theta_with(
        &self,
        input: &EncoderInput,
        cache: &EncodeCache,
        grad_z: &DenseMatrix,
        grad_mu_extra: Option<&DenseMatrix>,
        grad_logstd_extra: Option<&DenseMatrix>,
    ) -> Result<ThetaGrad> {
        if cache.version != self.version {
            return Err(Error::State(format!(
                "cache from model version {} used at version {}",
                cache.version, self.version
            )));
        }
        self.check_input(input)?;
        if grad_z.shape() != cache.mu.shape() {
            return Err(Error::Shape(format!(
                "gradient {:?} vs embedding {:?}",
                grad_z.shape(),
                cache.mu.shape()
            )));
        }
        let a = &input.a_prop;

        let mut d_mu = grad_z.clone();
        if let Some(g) = grad_mu_extra {
            d_mu.axpy(1.0, g)?;
        }
        let d_logstd = match (&cache.logstd, &cache.eps) {
            (Some(ls), Some(eps)) => {
                let mut d = DenseMatrix::zeros(ls.rows(), ls.cols());
                for (((o, &g), &e), &l) in d
                    .data_mut()
                    .iter_mut()
                    .zip(grad_z.data())
                    .zip(eps.data())
                    .zip(ls.data())
                {
                    *o = g * e * l.exp();
                }
                Some(d)
            }
            (Some(ls), None) => Some(DenseMatrix::zeros(ls.rows(), ls.cols())),
            _ => None,
        };
        let d_logstd = match (d_logstd, grad_logstd_extra) {
            (Some(mut d), Some(g)) => {
                d.axpy(1.0, g)?;
                Some(d)
            }
            (d, None) => d,
            (None, Some(_)) => {
                return Err(Error::State(
                    "log-std gradient for a model without that head".into(),
                ))
            }
        };

        let w2 = cache.ah.t_matmul(&d_mu)?;
        let mut dh_pre = d_mu.matmul_t(&self.w2)?;
        let w2_logstd = match (&d_logstd, &self.w2_logstd) {
            (Some(dl), Some(w)) => {
                dh_pre.axpy(1.0, &dl.matmul_t(w)?)?;
                Some(cache.ah.t_matmul(dl)?)
            }
            _ => None,
        };
        // Ã is symmetric, so Ãᵀ(·) = Ã(·).
        let mut dp1 = a.spmm(&dh_pre)?;
        for (d, &p) in dp1.data_mut().iter_mut().zip(cache.pre1.data()) {
            if p <= 0.0 {
                *d = 0.0;
            }
        }
        let w1 = input.xt.spmm(&a.spmm(&dp1)?)?;
        Ok(ThetaGrad { w1, w2, w2_logstd })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_graph() -> AttributedGraph {
        AttributedGraph::new(
            "t",
            4,
            [(0, 1), (1, 2), (2, 3)],
            DenseMatrix::from_fn(4, 3, |i, j| ((i + 2 * j) % 3) as f64),
            None,
            2,
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_give_zero_embedding() {
        let g = tiny_graph();
        let input = EncoderInput::new(&g);
        let mut m = GaeModel::new(Arch::Gae, 3, 4, 2, 0);
        m.set_theta(&vec![0.0; m.n_theta()]).unwrap();
        let (z, _) = m.encode(&input).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let g = tiny_graph();
        let input = EncoderInput::new(&g);
        let mut m = GaeModel::new(Arch::Gae, 3, 4, 2, 0);
        let (z, cache) = m.encode(&input).unwrap();
        let theta = m.theta();
        m.set_theta(&theta).unwrap();
        assert!(matches!(
            m.backprop_theta(&input, &cache, &z),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn same_seed_same_weights() {
        assert_eq!(
            GaeModel::new(Arch::Vgae, 5, 4, 2, 9),
            GaeModel::new(Arch::Vgae, 5, 4, 2, 9)
        );
        assert_ne!(
            GaeModel::new(Arch::Gae, 5, 4, 2, 9),
            GaeModel::new(Arch::Gae, 5, 4, 2, 10)
        );
    }
}
