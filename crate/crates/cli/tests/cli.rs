use std::path::Path;
use std::process::{Command, Output};

use rgae::graph::save_dataset;
use rgae::harness::{planted_partition, RunResult};

fn rgae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgae"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn blocks(dir: &Path) -> String {
    let path = dir.join("blocks");
    save_dataset(&planted_partition(&[8, 8], 0.7, 0.05, 1).unwrap(), &path).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn verify_theory_reports_every_check() {
    let o = rgae(&[
        "verify-theory",
        "--instances",
        "10",
        "--gradient-instances",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 14);
    assert!(text.lines().all(|l| l.ends_with("ok")));
}

#[test]
fn cluster_then_export() {
    let dir = tempfile::tempdir().unwrap();
    let data = blocks(dir.path());
    let out = dir.path().join("run");
    let out_s = out.to_string_lossy();
    let o = rgae(&[
        "cluster",
        "--dataset",
        &data,
        "--model",
        "gae",
        "--rethink",
        "--seeds",
        "0,1",
        "--pretrain-epochs",
        "20",
        "--train-epochs",
        "6",
        "--m1",
        "2",
        "--m2",
        "2",
        "--diagnostics-stride",
        "0",
        "--out",
        &out_s,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("best\tacc"));
    let r = RunResult::load(out.join("results.json")).unwrap();
    assert_eq!(r.seeds.len(), 2);
    assert!(r.rethink);
    assert_eq!(r.config.train_epochs, 6);

    let ck = r.seeds[0].checkpoint.to_string_lossy().into_owned();
    let tsv = dir.path().join("z.tsv");
    let o = rgae(&[
        "export-embeddings",
        "--checkpoint",
        &ck,
        "--dataset",
        &data,
        "--out",
        &tsv.to_string_lossy(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&tsv).unwrap();
    assert_eq!(text.lines().count(), 17);
    assert!(text.starts_with("z0\t"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = blocks(dir.path());
    let out = dir.path().join("cfg-run");
    let cfg = dir.path().join("c.json");
    let json = serde_json::json!({
        "dataset": data,
        "model": "dgae",
        "pretrain_epochs": 10,
        "train_epochs": 50,
        "diagnostics_stride": 0,
        "seeds": [3],
        "out": out,
    });
    std::fs::write(&cfg, json.to_string()).unwrap();
    let o = rgae(&[
        "cluster",
        "--config",
        &cfg.to_string_lossy(),
        "--train-epochs",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = RunResult::load(out.join("results.json")).unwrap();
    assert_eq!(r.config.train_epochs, 4);
    assert_eq!(r.seeds[0].seed, 3);
}

#[test]
fn invalid_inputs_fail_cleanly() {
    let o = rgae(&[
        "cluster",
        "--dataset",
        "/nonexistent/dataset",
        "--seed",
        "0",
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let dir = tempfile::tempdir().unwrap();
    let data = blocks(dir.path());
    let o = rgae(&["cluster", "--dataset", &data, "--ablation", "no_xi"]);
    assert!(
        !o.status.success(),
        "ablation without rethink must be rejected"
    );
    let o = rgae(&["cluster", "--dataset", &data, "--kl-reduction", "median"]);
    assert!(!o.status.success());
    let o = rgae(&[
        "robustness",
        "--dataset",
        &data,
        "--perturbations",
        "shuffle:3",
    ]);
    assert!(!o.status.success());
}
