use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rgae::diagnostics::{gradient_suite, identity_suite};
use rgae::graph::{load_dataset, PerturbSpec};
use rgae::harness::{
    ensure_pretrained, export_embeddings, run, run_ablation_grid, run_robustness, Ablation,
    ExperimentConfig,
};
use rgae::model::{Arch, Checkpoint, KlReduction};

#[derive(Parser)]
#[command(
    name = "rgae",
    version,
    about = "Graph auto-encoder clustering experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain (or reuse) the shared reconstruction checkpoints.
    Pretrain(ExperimentArgs),
    /// Pretrain, then run the clustering phase for every seed.
    Cluster(ExperimentArgs),
    /// Run one clustering experiment per ablation cell.
    Ablate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated ablations, e.g. `none,no_xi,fr_correction_delay:30`.
        #[arg(long, value_delimiter = ',', required = true)]
        axes: Vec<Ablation>,
    },
    /// Paired baseline / rethink runs on perturbed copies of the graph.
    Robustness {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated perturbations (`none`, `add_edges:400`, `feature_noise:0.1`, ...).
        #[arg(long, value_delimiter = ',', required = true)]
        perturbations: Vec<String>,
    },
    /// Write the embedding of a checkpoint as TSV.
    ExportEmbeddings {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use raw features instead of row-normalized ones.
        #[arg(long)]
        raw_features: bool,
    },
    /// Check the loss identities and closed-form gradients numerically.
    VerifyTheory {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 5)]
        gradient_instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// Flat JSON config; the flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    model: Option<Arch>,
    /// Enable the reliable-node sampler and graph rewriting (`--rethink=false` to force off).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    rethink: Option<bool>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    m1: Option<usize>,
    #[arg(long)]
    m2: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    train_epochs: Option<usize>,
    #[arg(long)]
    kl_reduction: Option<String>,
    #[arg(long)]
    diagnostics_stride: Option<usize>,
    /// Post-hoc models also descend the embedded k-means loss over the reliable nodes.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    first_group_clustering_loss: Option<bool>,
    #[arg(long)]
    ablation: Option<Ablation>,
    #[arg(long)]
    perturbation: Option<PerturbSpec>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory holding the shared pretraining checkpoints.
    #[arg(long)]
    pretrain_ckpt: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.dataset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(d)) => ExperimentConfig::new(d),
            (None, None) => bail!("either --config or --dataset is required"),
        };
        if let Some(d) = &self.dataset {
            cfg.dataset = d.clone();
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = &self.$f { cfg.$f = v.clone(); })* };
        }
        set!(
            model,
            rethink,
            alpha1,
            m1,
            m2,
            gamma,
            lr,
            pretrain_epochs,
            train_epochs,
            diagnostics_stride,
            first_group_clustering_loss,
            ablation,
            out
        );
        if let Some(a) = self.alpha2 {
            cfg.alpha2 = Some(a);
        }
        if let Some(p) = self.perturbation {
            cfg.perturbation = Some(p);
        }
        if let Some(p) = &self.pretrain_ckpt {
            cfg.pretrain_ckpt = Some(p.clone());
        }
        if let Some(r) = &self.kl_reduction {
            cfg.kl_reduction = match r.as_str() {
                "sum" => KlReduction::Sum,
                "mean" => KlReduction::Mean,
                other => bail!("unknown KL reduction `{other}` (expected sum or mean)"),
            };
        }
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.4}", x))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Pretrain(args) => {
            let cfg = args.resolve()?;
            for (seed, path, hash) in ensure_pretrained(&cfg)? {
                println!("seed {seed}\t{}\t{hash}", path.display());
            }
        }
        Command::Cluster(args) => {
            let cfg = args.resolve()?;
            let r = run(&cfg)?;
            for s in &r.seeds {
                println!(
                    "seed {}\tacc {}\tnmi {}\tari {}\t{:.2}s\t{} epochs\t{:?}",
                    s.seed,
                    fmt_opt(s.acc),
                    fmt_opt(s.nmi),
                    fmt_opt(s.ari),
                    s.wall_time_s,
                    s.epochs_run,
                    s.stop_reason
                );
            }
            println!(
                "best\tacc {}\tnmi {}\tari {}",
                fmt_opt(r.best.acc),
                fmt_opt(r.best.nmi),
                fmt_opt(r.best.ari)
            );
            println!(
                "mean\tacc {}\tnmi {}\tari {}",
                fmt_opt(r.mean.acc),
                fmt_opt(r.mean.nmi),
                fmt_opt(r.mean.ari)
            );
            println!("results: {}", cfg.out.join("results.json").display());
        }
        Command::Ablate { exp, axes } => {
            let mut cfg = exp.resolve()?;
            cfg.rethink = true;
            for row in run_ablation_grid(&cfg, &axes)? {
                println!(
                    "{}\tbest acc {}\tmean acc {}",
                    row.ablation,
                    fmt_opt(row.result.best.acc),
                    fmt_opt(row.result.mean.acc)
                );
            }
        }
        Command::Robustness { exp, perturbations } => {
            let cfg = exp.resolve()?;
            let specs = perturbations
                .iter()
                .map(|p| {
                    if p == "none" {
                        Ok(None)
                    } else {
                        p.parse().map(Some)
                    }
                })
                .collect::<rgae::Result<Vec<_>>>()?;
            for row in run_robustness(&cfg, &specs)? {
                println!(
                    "{}\tbaseline {}\trethink {}",
                    row.perturbation.as_deref().unwrap_or("none"),
                    fmt_opt(row.baseline.best.acc),
                    fmt_opt(row.rethink.best.acc)
                );
            }
        }
        Command::ExportEmbeddings {
            checkpoint,
            dataset,
            out,
            raw_features,
        } => {
            let ck = Checkpoint::load(&checkpoint)
                .with_context(|| format!("loading {}", checkpoint.display()))?;
            let graph = load_dataset(&dataset)?;
            let z = export_embeddings(&ck, &graph, !raw_features, &out)?;
            println!(
                "wrote {}x{} embedding to {}",
                z.rows(),
                z.cols(),
                out.display()
            );
        }
        Command::VerifyTheory {
            instances,
            gradient_instances,
            seed,
        } => {
            let r = identity_suite(instances, seed)?;
            let mut ok = true;
            for (name, v, tol) in [
                ("bce_decomposition", r.max_prop1_rel, 1e-8),
                ("centroid_laplacian", r.max_prop2_rel, 1e-10),
                ("combined_objective", r.max_thm1_rel, 1e-8),
            ] {
                let pass = v < tol;
                ok &= pass;
                println!(
                    "{name:<24} {v:.3e}  (< {tol:.0e})  {}",
                    if pass { "ok" } else { "FAIL" }
                );
            }
            for c in gradient_suite(gradient_instances, seed)? {
                let pass = c.rel_err < 1e-5;
                ok &= pass;
                println!(
                    "grad {:<19} {:.3e}  (< 1e-5)  {}",
                    c.name,
                    c.rel_err,
                    if pass { "ok" } else { "FAIL" }
                );
            }
            return Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            });
        }
    }
    Ok(ExitCode::SUCCESS)
}
