//! Result files written by [`run`] into the configured output directory:
//!
//! ```text
//! results.json              RunResult (schema "rgae-results/1")
//! trace-seed<S>.csv         per-epoch trace, columns per diagnostics::CSV_HEADER
//! trace-seed<S>.json        TraceSummary
//! graph-seed<S>.tsv         final reconstruction target "u<TAB>v<TAB>O|A"
//! graph-seed<S>.tsv.deleted.tsv
//! model-seed<S>.json        final checkpoint
//! <pretrain dir>/<arch>-<graph>-seed<S>-....json   shared pretraining checkpoint
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Ablation, ExperimentConfig};
use crate::cluster::evaluate_clustering;
use crate::error::{Error, Result};
use crate::graph::{
    load_dataset, normalize_adjacency, perturb_graph, row_normalize, AdjacencyMode,
    AttributedGraph, PerturbSpec,
};
use crate::model::{
    pretrain, train_joint, write_atomic, Arch, Checkpoint, EncoderInput, GaeModel, StopReason,
};

pub const RESULTS_SCHEMA: &str = "rgae-results/1";

/// Encoder input with the configured feature preprocessing.
pub fn prepare_input(
    graph: &AttributedGraph,
    row_normalize_features: bool,
) -> Result<EncoderInput> {
    let a = normalize_adjacency(graph, AdjacencyMode::Propagation);
    if row_normalize_features {
        EncoderInput::from_parts(&a, &row_normalize(graph.features())?)
    } else {
        EncoderInput::from_parts(&a, graph.features())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    /// Clustering phase only, diagnostics excluded.
    pub wall_time_s: f64,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub final_omega_size: usize,
    pub omega_history: Vec<usize>,
    pub pretrain_hash: String,
    pub pretrain_checkpoint: PathBuf,
    pub checkpoint: PathBuf,
    pub trace_csv: PathBuf,
    pub trace_summary: PathBuf,
    pub graph_edges: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema: String,
    pub model: Arch,
    pub rethink: bool,
    pub ablation: Ablation,
    pub dataset: String,
    pub graph_hash: String,
    pub perturbation: Option<String>,
    /// Content hash of the perturbed graph; paired runs must agree on it.
    pub perturbation_hash: Option<String>,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedResult>,
    /// Per-metric maximum over seeds.
    pub best: Aggregate,
    pub mean: Aggregate,
    /// Population standard deviation over seeds.
    pub std: Aggregate,
}

impl RunResult {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn aggregate(seeds: &[SeedResult], f: impl Fn(&[f64]) -> f64) -> Aggregate {
    let col = |g: fn(&SeedResult) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = seeds.iter().map(g).collect();
        v.filter(|v| !v.is_empty()).map(|v| f(&v))
    };
    Aggregate {
        acc: col(|s| s.acc),
        nmi: col(|s| s.nmi),
        ari: col(|s| s.ari),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Loads the dataset and applies the configured perturbation.
fn load_graph(cfg: &ExperimentConfig) -> Result<(AttributedGraph, Option<String>)> {
    let graph = load_dataset(&cfg.dataset)?;
    match cfg.perturbation {
        Some(spec) => {
            let g = perturb_graph(&graph, spec, cfg.perturbation_seed)?;
            let h = g.content_hash();
            Ok((g, Some(h)))
        }
        None => Ok((graph, None)),
    }
}

fn pretrain_path(cfg: &ExperimentConfig, graph_hash: &str, seed: u64) -> PathBuf {
    cfg.pretrain_dir().join(format!(
        "{}-{}-seed{seed}-e{}-lr{}-rn{}.json",
        cfg.model,
        &graph_hash[..16],
        cfg.pretrain_epochs,
        cfg.lr,
        u8::from(cfg.row_normalize_features)
    ))
}

/// Loads the shared pretraining checkpoint for `seed`, training and saving
/// it first when absent.
fn pretrained_model(
    cfg: &ExperimentConfig,
    graph: &AttributedGraph,
    input: &EncoderInput,
    seed: u64,
) -> Result<(GaeModel, Checkpoint, PathBuf)> {
    let graph_hash = graph.content_hash();
    let path = pretrain_path(cfg, &graph_hash, seed);
    if path.exists() {
        let ck = Checkpoint::load(&path)?;
        if ck.arch != cfg.model || ck.graph_hash.as_deref() != Some(graph_hash.as_str()) {
            return Err(Error::State(format!(
                "checkpoint {} was trained for a different model or graph",
                path.display()
            )));
        }
        log::info!(
            "seed {seed}: reusing pretraining checkpoint {}",
            path.display()
        );
        return Ok((ck.clone().into_model()?, ck, path));
    }
    let mut model = GaeModel::with_default_dims(cfg.model, input.n_features(), seed);
    let tcfg = cfg.train_config(seed);
    let report = pretrain(&mut model, input, &graph.adjacency(), &tcfg)?;
    log::info!(
        "seed {seed}: pretrained {} epochs, loss {:.5} -> {:.5}",
        report.losses.len(),
        report.losses.first().copied().unwrap_or(f64::NAN),
        report.losses.last().copied().unwrap_or(f64::NAN)
    );
    let ck = Checkpoint::from_model(&model, Some(graph_hash));
    ck.save(&path)?;
    Ok((model, ck, path))
}

/// Makes sure the shared pretraining checkpoint of every seed exists and
/// returns `(seed, path, weights hash)` for each.
pub fn ensure_pretrained(cfg: &ExperimentConfig) -> Result<Vec<(u64, PathBuf, String)>> {
    cfg.validate()?;
    let (graph, _) = load_graph(cfg)?;
    let input = prepare_input(&graph, cfg.row_normalize_features)?;
    cfg.seeds
        .iter()
        .map(|&seed| {
            let (_, ck, path) = pretrained_model(cfg, &graph, &input, seed)?;
            Ok((seed, path, ck.weights_hash()))
        })
        .collect()
}

/// Pretrains (or reuses the shared checkpoint) and trains once per seed,
/// writing every artifact under `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let (graph, perturbation_hash) = load_graph(cfg)?;
    let input = prepare_input(&graph, cfg.row_normalize_features)?;
    let out = &cfg.out;
    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let (mut model, ck, pretrain_checkpoint) = pretrained_model(cfg, &graph, &input, seed)?;
        let tcfg = cfg.train_config(seed);
        let outcome = train_joint(&mut model, &input, &graph, &tcfg)?;
        let scores = graph
            .labels()
            .map(|t| evaluate_clustering(&outcome.labels, t, graph.k_clusters()))
            .transpose()?;
        log::info!(
            "{}{} seed {seed}: {} epochs ({:?}), acc {:?}, {:.1}s",
            if cfg.rethink { "r-" } else { "" },
            cfg.model,
            outcome.epochs_run,
            outcome.stop_reason,
            scores.map(|s| s.acc),
            outcome.wall_time.as_secs_f64()
        );

        let trace_csv = out.join(format!("trace-seed{seed}.csv"));
        let trace_summary = out.join(format!("trace-seed{seed}.json"));
        let graph_edges = out.join(format!("graph-seed{seed}.tsv"));
        let checkpoint = out.join(format!("model-seed{seed}.json"));
        outcome.trace.save_csv(&trace_csv)?;
        write_atomic(
            &trace_summary,
            serde_json::to_string_pretty(&outcome.trace.summary())?.as_bytes(),
        )?;
        outcome.final_graph.save(&graph_edges)?;
        Checkpoint::from_model(&model, Some(graph.content_hash())).save(&checkpoint)?;

        seeds.push(SeedResult {
            seed,
            acc: scores.map(|s| s.acc),
            nmi: scores.map(|s| s.nmi),
            ari: scores.map(|s| s.ari),
            wall_time_s: outcome.wall_time.as_secs_f64(),
            epochs_run: outcome.epochs_run,
            stop_reason: outcome.stop_reason,
            final_omega_size: outcome.final_omega.len(),
            omega_history: outcome.omega_history,
            pretrain_hash: ck.weights_hash(),
            pretrain_checkpoint,
            checkpoint,
            trace_csv,
            trace_summary,
            graph_edges,
        });
    }
    let result = RunResult {
        schema: RESULTS_SCHEMA.into(),
        model: cfg.model,
        rethink: cfg.rethink,
        ablation: cfg.ablation,
        dataset: graph.name().to_string(),
        graph_hash: graph.content_hash(),
        perturbation: cfg.perturbation.map(|p| p.to_string()),
        perturbation_hash,
        config_hash: cfg.config_hash(),
        config: cfg.clone(),
        best: aggregate(&seeds, |v| {
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }),
        mean: aggregate(&seeds, mean),
        std: aggregate(&seeds, std),
        seeds,
    };
    write_atomic(
        &out.join("results.json"),
        serde_json::to_string_pretty(&result)?.as_bytes(),
    )?;
    Ok(result)
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub ablation: Ablation,
    pub result: RunResult,
}

/// One run per ablation cell, all sharing the base pretraining checkpoints.
/// Cells write into `<out>/<ablation>/`.
pub fn run_ablation_grid(base: &ExperimentConfig, axes: &[Ablation]) -> Result<Vec<GridRow>> {
    let mut rows = Vec::with_capacity(axes.len());
    for &ablation in axes {
        let mut cfg = base.clone();
        cfg.ablation = ablation;
        cfg.out = base.out.join(slug(&ablation.to_string()));
        cfg.pretrain_ckpt = Some(base.pretrain_dir());
        rows.push(GridRow {
            ablation,
            result: run(&cfg)?,
        });
    }
    write_atomic(
        &base.out.join("grid.json"),
        serde_json::to_string_pretty(&rows)?.as_bytes(),
    )?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub perturbation: Option<String>,
    pub baseline: RunResult,
    pub rethink: RunResult,
}

/// For each perturbation, the baseline and rethink variants on the same
/// perturbed graph, seeds and pretraining checkpoints. Cells write into
/// `<out>/<perturbation>/{baseline,rethink}/`.
pub fn run_robustness(
    base: &ExperimentConfig,
    perturbations: &[Option<PerturbSpec>],
) -> Result<Vec<RobustnessRow>> {
    let mut rows = Vec::with_capacity(perturbations.len());
    for &p in perturbations {
        let name = p.map_or_else(|| "none".to_string(), |p| slug(&p.to_string()));
        let mut cfg = base.clone();
        cfg.perturbation = p;
        cfg.ablation = Ablation::None;
        cfg.pretrain_ckpt = Some(base.pretrain_dir());
        cfg.rethink = false;
        cfg.out = base.out.join(&name).join("baseline");
        let baseline = run(&cfg)?;
        cfg.rethink = true;
        cfg.out = base.out.join(&name).join("rethink");
        let rethink = run(&cfg)?;
        let pretrain_match = baseline
            .seeds
            .iter()
            .zip(&rethink.seeds)
            .all(|(a, b)| a.pretrain_hash == b.pretrain_hash);
        if baseline.perturbation_hash != rethink.perturbation_hash || !pretrain_match {
            return Err(Error::State(format!(
                "paired runs for `{name}` did not share their inputs"
            )));
        }
        rows.push(RobustnessRow {
            perturbation: p.map(|p| p.to_string()),
            baseline,
            rethink,
        });
    }
    write_atomic(
        &base.out.join("robustness.json"),
        serde_json::to_string_pretty(&rows)?.as_bytes(),
    )?;
    Ok(rows)
}
