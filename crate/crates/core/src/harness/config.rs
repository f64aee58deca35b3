use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{hex, PerturbSpec};
use crate::model::{Arch, KlReduction, OperatorToggles, TrainConfig};

/// One cell of the ablation taxonomy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Ablation {
    #[default]
    None,
    /// Confidence threshold removed; the margin threshold keeps its value.
    NoAlpha1,
    NoAlpha2,
    /// Every node counts as reliable.
    NoXi,
    NoAddEdge,
    NoDropEdge,
    NoUpsilon,
    /// Rewrite the whole graph once up front instead of correcting gradually.
    FdProtectionSingleStep,
    /// Train as the baseline for this many epochs before the operators start.
    FrCorrectionDelay(usize),
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ablation::None => f.write_str("none"),
            Ablation::NoAlpha1 => f.write_str("no_alpha1"),
            Ablation::NoAlpha2 => f.write_str("no_alpha2"),
            Ablation::NoXi => f.write_str("no_xi"),
            Ablation::NoAddEdge => f.write_str("no_add_edge"),
            Ablation::NoDropEdge => f.write_str("no_drop_edge"),
            Ablation::NoUpsilon => f.write_str("no_upsilon"),
            Ablation::FdProtectionSingleStep => f.write_str("fd_protection_single_step"),
            Ablation::FrCorrectionDelay(e) => write!(f, "fr_correction_delay:{e}"),
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => Ablation::None,
            "no_alpha1" => Ablation::NoAlpha1,
            "no_alpha2" => Ablation::NoAlpha2,
            "no_xi" => Ablation::NoXi,
            "no_add_edge" => Ablation::NoAddEdge,
            "no_drop_edge" => Ablation::NoDropEdge,
            "no_upsilon" => Ablation::NoUpsilon,
            "fd_protection_single_step" => Ablation::FdProtectionSingleStep,
            other => match other.strip_prefix("fr_correction_delay:") {
                Some(e) => Ablation::FrCorrectionDelay(
                    e.parse()
                        .map_err(|err| Error::Config(format!("ablation `{s}`: {err}")))?,
                ),
                None => return Err(Error::Config(format!("unknown ablation `{s}`"))),
            },
        })
    }
}

impl TryFrom<String> for Ablation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Ablation> for String {
    fn from(a: Ablation) -> String {
        a.to_string()
    }
}

impl Ablation {
    /// Rewrites `cfg` for this cell.
    pub fn apply(self, cfg: &mut TrainConfig) {
        let t = &mut cfg.toggles;
        match self {
            Ablation::None => {}
            Ablation::NoAlpha1 => {
                cfg.alpha2 = Some(cfg.alpha2());
                cfg.alpha1 = 0.0;
            }
            Ablation::NoAlpha2 => cfg.alpha2 = Some(0.0),
            Ablation::NoXi => t.use_xi = false,
            Ablation::NoAddEdge => t.add_edges = false,
            Ablation::NoDropEdge => t.drop_edges = false,
            Ablation::NoUpsilon => t.use_upsilon = false,
            Ablation::FdProtectionSingleStep => t.fd_protection_single_step = true,
            Ablation::FrCorrectionDelay(e) => t.fr_correction_delay = e,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

/// Flat JSON experiment description. Every key is optional except
/// `dataset`; command-line flags override file values.
///
/// ```json
/// {
///   "dataset": "data/cora", "model": "dgae", "rethink": true,
///   "gamma": 0.001, "lr": 0.01, "pretrain_epochs": 200, "train_epochs": 200,
///   "alpha1": 0.3, "alpha2": null, "m1": 20, "m2": 15,
///   "convergence_fraction": 0.9, "kl_reduction": "sum",
///   "first_group_clustering_loss": false, "diagnostics_stride": 1,
///   "kmeans_n_init": 10, "row_normalize_features": true,
///   "ablation": "none", "perturbation": null, "perturbation_seed": 0,
///   "seeds": [0, 1, 2], "out": "runs", "pretrain_ckpt": null
/// }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_arch")]
    pub model: Arch,
    #[serde(default)]
    pub rethink: bool,
    #[serde(default = "d::gamma")]
    pub gamma: f64,
    #[serde(default = "d::lr")]
    pub lr: f64,
    #[serde(default = "d::pretrain_epochs")]
    pub pretrain_epochs: usize,
    #[serde(default = "d::train_epochs")]
    pub train_epochs: usize,
    #[serde(default = "d::alpha1")]
    pub alpha1: f64,
    #[serde(default)]
    pub alpha2: Option<f64>,
    #[serde(default = "d::m1")]
    pub m1: usize,
    #[serde(default = "d::m2")]
    pub m2: usize,
    #[serde(default = "d::convergence_fraction")]
    pub convergence_fraction: f64,
    #[serde(default = "d::kl_reduction")]
    pub kl_reduction: KlReduction,
    #[serde(default)]
    pub first_group_clustering_loss: bool,
    #[serde(default = "d::diagnostics_stride")]
    pub diagnostics_stride: usize,
    #[serde(default = "d::kmeans_n_init")]
    pub kmeans_n_init: usize,
    #[serde(default = "default_true")]
    pub row_normalize_features: bool,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default, with = "opt_perturb")]
    pub perturbation: Option<PerturbSpec>,
    #[serde(default)]
    pub perturbation_seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Directory of shared pretraining checkpoints; defaults to `<out>/pretrain`.
    #[serde(default)]
    pub pretrain_ckpt: Option<PathBuf>,
}

fn default_arch() -> Arch {
    Arch::Dgae
}

/// Defaults mirrored from [`TrainConfig::default`].
mod d {
    use super::*;

    fn t() -> TrainConfig {
        TrainConfig::default()
    }
    pub fn gamma() -> f64 {
        t().gamma
    }
    pub fn lr() -> f64 {
        t().lr
    }
    pub fn pretrain_epochs() -> usize {
        t().pretrain_epochs
    }
    pub fn train_epochs() -> usize {
        t().train_epochs
    }
    pub fn alpha1() -> f64 {
        t().alpha1
    }
    pub fn m1() -> usize {
        t().m1
    }
    pub fn m2() -> usize {
        t().m2
    }
    pub fn convergence_fraction() -> f64 {
        t().convergence_fraction
    }
    pub fn kl_reduction() -> KlReduction {
        t().kl_reduction
    }
    pub fn diagnostics_stride() -> usize {
        t().diagnostics_stride
    }
    pub fn kmeans_n_init() -> usize {
        t().kmeans_n_init
    }
}

/// Perturbations are written as their `kind:amount` string.
mod opt_perturb {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        v: &Option<PerturbSpec>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(p) => s.serialize_some(&p.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<PerturbSpec>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        raw.map(|s| s.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        let mut cfg: ExperimentConfig =
            serde_json::from_value(serde_json::json!({ "dataset": "" }))
                .expect("defaults deserialize");
        cfg.dataset = dataset.into();
        cfg
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.ablation != Ablation::None && !self.rethink {
            return Err(Error::Config(format!(
                "ablation `{}` only applies to runs with rethink enabled",
                self.ablation
            )));
        }
        self.train_config(self.seeds[0]).validate()
    }

    /// Training settings for one seed, with the ablation applied.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig {
            gamma: self.gamma,
            lr: self.lr,
            pretrain_epochs: self.pretrain_epochs,
            train_epochs: self.train_epochs,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            m1: self.m1,
            m2: self.m2,
            seed,
            rethink: self.rethink,
            convergence_fraction: self.convergence_fraction,
            kl_reduction: self.kl_reduction,
            first_group_clustering_loss: self.first_group_clustering_loss,
            diagnostics_stride: self.diagnostics_stride,
            kmeans_n_init: self.kmeans_n_init,
            toggles: OperatorToggles::default(),
        };
        self.ablation.apply(&mut cfg);
        cfg
    }

    /// SHA-256 of the canonical JSON with the output locations removed, so
    /// the same experiment written to two places hashes the same.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.pretrain_ckpt = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    pub fn pretrain_dir(&self) -> PathBuf {
        self.pretrain_ckpt
            .clone()
            .unwrap_or_else(|| self.out.join("pretrain"))
    }
}
