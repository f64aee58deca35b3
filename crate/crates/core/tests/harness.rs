use std::path::Path;

use rgae::graph::{load_dataset, save_dataset, PerturbSpec};
use rgae::harness::{
    export_embeddings, planted_partition, read_embeddings, run, run_ablation_grid, run_robustness,
    Ablation, ExperimentConfig, RunResult, RESULTS_SCHEMA,
};
use rgae::model::{Arch, Checkpoint, GaeModel};
use rgae::Error;

fn dataset(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("blocks");
    let g = planted_partition(&[10, 10, 10], 0.5, 0.05, 3).unwrap();
    save_dataset(&g, &path).unwrap();
    path
}

fn small_config(dir: &Path, out: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(dataset(dir));
    c.pretrain_epochs = 30;
    c.train_epochs = 12;
    c.m1 = 3;
    c.m2 = 2;
    c.diagnostics_stride = 5;
    c.kmeans_n_init = 2;
    c.seeds = vec![7];
    c.out = dir.join(out);
    c
}

fn without_timing(mut r: RunResult) -> RunResult {
    r.seeds.iter_mut().for_each(|s| s.wall_time_s = 0.0);
    r
}

#[test]
fn repeated_runs_are_identical_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), "a");
    cfg.rethink = true;
    let first = without_timing(run(&cfg).unwrap());
    let on_disk = without_timing(RunResult::load(cfg.out.join("results.json")).unwrap());
    assert_eq!(first, on_disk);
    let second = without_timing(run(&cfg).unwrap());
    assert_eq!(first, second);
    assert_eq!(first.schema, RESULTS_SCHEMA);
    let s = &first.seeds[0];
    for p in [
        &s.checkpoint,
        &s.trace_csv,
        &s.trace_summary,
        &s.graph_edges,
        &s.pretrain_checkpoint,
    ] {
        assert!(p.exists(), "{}", p.display());
    }
}

#[test]
fn baseline_and_rethink_share_pretraining() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), "pair");
    cfg.seeds = vec![0, 1];
    let d = run(&cfg).unwrap();
    cfg.rethink = true;
    let r = run(&cfg).unwrap();
    for (a, b) in d.seeds.iter().zip(&r.seeds) {
        assert_eq!(a.pretrain_hash, b.pretrain_hash);
        assert_eq!(a.pretrain_checkpoint, b.pretrain_checkpoint);
    }
    assert_eq!(d.graph_hash, r.graph_hash);
    assert_ne!(d.config_hash, r.config_hash);
    assert!(d.best.acc >= d.mean.acc);
}

#[test]
fn ablation_grid_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), "grid");
    cfg.rethink = true;
    let axes = [
        Ablation::None,
        Ablation::NoXi,
        Ablation::FdProtectionSingleStep,
        Ablation::FrCorrectionDelay(4),
    ];
    let rows = run_ablation_grid(&cfg, &axes).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(cfg.out.join("grid.json").exists());
    let hashes: Vec<_> = rows
        .iter()
        .map(|r| r.result.seeds[0].pretrain_hash.clone())
        .collect();
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    // Without the sampler Ω is never updated from confidences, so no stop.
    let no_xi = &rows[1].result.seeds[0];
    assert_eq!(no_xi.epochs_run, 12);
    assert!(no_xi.omega_history.iter().all(|&n| n == 30));
    // The single-step rewrite never samples.
    assert!(rows[2].result.seeds[0].omega_history.is_empty());
    // Delayed correction starts sampling at epoch 4: updates at 4, 7, 10.
    assert!(rows[3].result.seeds[0].omega_history.len() <= 3);
}

#[test]
fn robustness_pairs_share_the_perturbed_graph() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "robust");
    let grid = [
        None,
        Some(PerturbSpec::DropRandomEdges(5)),
        Some(PerturbSpec::FeatureGaussianNoise(0.0)),
    ];
    let rows = run_robustness(&cfg, &grid).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r.baseline.perturbation_hash, r.rethink.perturbation_hash);
        assert!(!r.baseline.rethink && r.rethink.rethink);
    }
    let original = Some(rows[0].baseline.graph_hash.clone());
    assert_eq!(rows[0].baseline.perturbation_hash, None);
    assert_ne!(rows[1].baseline.perturbation_hash, original);
    // Zero noise leaves the graph as it was.
    assert_eq!(rows[2].baseline.perturbation_hash, original);
    assert!(cfg.out.join("robustness.json").exists());
}

#[test]
fn exported_embeddings_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "export");
    let res = run(&cfg).unwrap();
    let graph = load_dataset(&cfg.dataset).unwrap();
    let ck = Checkpoint::load(&res.seeds[0].checkpoint).unwrap();
    let path = dir.path().join("z.tsv");
    let z = export_embeddings(&ck, &graph, true, &path).unwrap();
    let (back, labels) = read_embeddings(&path).unwrap();
    assert_eq!((back.rows(), back.cols()), (30, 16));
    assert_eq!(back, z);
    assert_eq!(labels.as_deref(), graph.labels());

    let other = planted_partition(&[10, 10, 10], 0.5, 0.05, 4).unwrap();
    assert!(matches!(
        export_embeddings(&ck, &other, true, dir.path().join("bad.tsv")),
        Err(Error::State(_))
    ));
}

#[test]
fn zero_weight_model_exports_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let graph = planted_partition(&[4, 4], 0.8, 0.1, 0).unwrap();
    let mut m = GaeModel::with_default_dims(Arch::Gae, graph.n_features(), 0);
    m.set_theta(&vec![0.0; m.n_theta()]).unwrap();
    let z = export_embeddings(
        &Checkpoint::from_model(&m, None),
        &graph,
        true,
        dir.path().join("z.tsv"),
    )
    .unwrap();
    assert!(z.data().iter().all(|&v| v == 0.0));
}

#[test]
fn config_files_are_strict() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(
        &p,
        r#"{"dataset": "x", "rethink": true, "alpha1": 0.4, "ablation": "no_alpha2"}"#,
    )
    .unwrap();
    let c = ExperimentConfig::load(&p).unwrap();
    assert_eq!(c.alpha1, 0.4);
    assert_eq!(c.ablation, Ablation::NoAlpha2);
    assert_eq!(c.seeds, vec![0, 1, 2]);
    c.validate().unwrap();

    std::fs::write(&p, r#"{"dataset": "x", "alpha": 0.4}"#).unwrap();
    assert!(ExperimentConfig::load(&p).is_err());

    let mut c = ExperimentConfig::new("x");
    c.ablation = Ablation::NoXi;
    assert!(matches!(c.validate(), Err(Error::Config(_))));
}
