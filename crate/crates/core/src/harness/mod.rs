//! Experiment runs: configuration, seeded pretraining with shared
//! checkpoints, result files, ablation and robustness grids.

mod config;
mod export;
mod run;
mod synthetic;

pub use config::{Ablation, ExperimentConfig};
pub use export::{export_embeddings, read_embeddings};
pub use run::{
    ensure_pretrained, prepare_input, run, run_ablation_grid, run_robustness, Aggregate, GridRow,
    RobustnessRow, RunResult, SeedResult, RESULTS_SCHEMA,
};
pub use synthetic::{planted_partition, star_count};
