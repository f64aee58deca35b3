//! Dataset directory layout:
//!
//! ```text
//! <dir>/meta.json      {"n_nodes": N, "k_clusters": K, "dataset_name": "..."}
//! <dir>/edges.tsv      one "u<TAB>v" pair per line, 0-indexed
//! <dir>/features.tsv   optional; N lines of J space-separated decimals
//! <dir>/labels.tsv     optional; N lines, one integer class each
//! ```
//!
//! Edge lines may be separated by any whitespace. Reversed or repeated
//! pairs collapse into one undirected edge. Without `features.tsv` the
//! degree one-hot encoding is used.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{degree_onehot_features, AttributedGraph};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n_nodes: usize,
    pub k_clusters: usize,
    #[serde(default)]
    pub dataset_name: Option<String>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<AttributedGraph> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta = serde_json::from_str(&read(&meta_path)?)
        .map_err(|e| Error::format(&meta_path, e.to_string()))?;
    let n = meta.n_nodes;

    let edges_path = dir.join("edges.tsv");
    let mut edges = Vec::new();
    for (lineno, line) in read(&edges_path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.ok_or_else(|| {
                Error::format(
                    &edges_path,
                    format!("line {}: expected two node ids", lineno + 1),
                )
            })?
            .parse::<usize>()
            .map_err(|e| Error::format(&edges_path, format!("line {}: {e}", lineno + 1)))
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::format(
                &edges_path,
                format!("line {}: more than two fields", lineno + 1),
            ));
        }
        if u >= n || v >= n {
            return Err(Error::format(
                &edges_path,
                format!(
                    "line {}: node index out of range for n_nodes = {n}",
                    lineno + 1
                ),
            ));
        }
        if u == v {
            return Err(Error::format(
                &edges_path,
                format!("line {}: self-loop on node {u}", lineno + 1),
            ));
        }
        edges.push((u, v));
    }

    let labels_path = dir.join("labels.tsv");
    let labels = if labels_path.exists() {
        let mut labels = Vec::with_capacity(n);
        for (lineno, line) in read(&labels_path)?.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let c: usize = line
                .parse()
                .map_err(|e| Error::format(&labels_path, format!("line {}: {e}", lineno + 1)))?;
            if c >= meta.k_clusters {
                return Err(Error::format(
                    &labels_path,
                    format!(
                        "line {}: label {c} not below k_clusters = {}",
                        lineno + 1,
                        meta.k_clusters
                    ),
                ));
            }
            labels.push(c);
        }
        if labels.len() != n {
            return Err(Error::format(
                &labels_path,
                format!("{} labels for {n} nodes", labels.len()),
            ));
        }
        Some(labels)
    } else {
        None
    };

    let name = meta.dataset_name.clone().unwrap_or_else(|| {
        dir.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });

    let features_path = dir.join("features.tsv");
    let features = if features_path.exists() {
        let text = read(&features_path)?;
        let mut data = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for tok in line.split_whitespace() {
                let x: f64 = tok.parse().map_err(|e| {
                    Error::format(&features_path, format!("line {}: {e}", lineno + 1))
                })?;
                if !x.is_finite() {
                    return Err(Error::format(
                        &features_path,
                        format!("line {}: non-finite value", lineno + 1),
                    ));
                }
                data.push(x);
            }
            let width = data.len() - before;
            match cols {
                None => cols = Some(width),
                Some(c) if c != width => {
                    return Err(Error::format(
                        &features_path,
                        format!("line {}: {width} values, expected {c}", lineno + 1),
                    ))
                }
                _ => {}
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::format(
                &features_path,
                format!("{rows} feature rows for {n} nodes"),
            ));
        }
        DenseMatrix::from_vec(n, cols.unwrap_or(0), data)?
    } else {
        let bare = AttributedGraph::new(
            name.clone(),
            n,
            edges.iter().copied(),
            DenseMatrix::zeros(n, 0),
            None,
            meta.k_clusters,
        )?;
        degree_onehot_features(&bare)
    };

    AttributedGraph::new(name, n, edges, features, labels, meta.k_clusters)
}

/// Writes `graph` in the layout read by [`load_dataset`]. Features are
/// printed in shortest round-trip form, so a reload is bit-exact.
pub fn save_dataset(graph: &AttributedGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let meta = DatasetMeta {
        n_nodes: graph.n_nodes(),
        k_clusters: graph.k_clusters(),
        dataset_name: Some(graph.name().to_string()),
    };
    write_file(
        &dir.join("meta.json"),
        serde_json::to_string_pretty(&meta)?.as_bytes(),
    )?;

    let mut buf = Vec::new();
    for &(u, v) in graph.edges() {
        writeln!(buf, "{u}\t{v}").expect("write to Vec");
    }
    write_file(&dir.join("edges.tsv"), &buf)?;

    buf.clear();
    let x = graph.features();
    for i in 0..x.rows() {
        let row: Vec<String> = x.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(buf, "{}", row.join(" ")).expect("write to Vec");
    }
    write_file(&dir.join("features.tsv"), &buf)?;

    if let Some(labels) = graph.labels() {
        buf.clear();
        for c in labels {
            writeln!(buf, "{c}").expect("write to Vec");
        }
        write_file(&dir.join("labels.tsv"), &buf)?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
