//! Embedding export: a header line `z0<TAB>…<TAB>z15[<TAB>label]`, then one
//! row per node with the deterministic embedding and, when the graph has
//! labels, its ground-truth class.

use std::fmt::Write as _;
use std::path::Path;

use super::run::prepare_input;
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::DenseMatrix;
use crate::model::{write_atomic, Checkpoint};

pub fn export_embeddings(
    checkpoint: &Checkpoint,
    graph: &AttributedGraph,
    row_normalize_features: bool,
    out: impl AsRef<Path>,
) -> Result<DenseMatrix> {
    if let Some(h) = &checkpoint.graph_hash {
        if *h != graph.content_hash() {
            return Err(Error::State(
                "checkpoint was trained on a different graph".into(),
            ));
        }
    }
    if checkpoint.w1.rows() != graph.n_features() {
        return Err(Error::State(format!(
            "checkpoint expects {} features, graph has {}",
            checkpoint.w1.rows(),
            graph.n_features()
        )));
    }
    let model = checkpoint.clone().into_model()?;
    let input = prepare_input(graph, row_normalize_features)?;
    let (z, _) = model.encode(&input)?;

    let mut s = String::new();
    let mut header: Vec<String> = (0..z.cols()).map(|c| format!("z{c}")).collect();
    if graph.labels().is_some() {
        header.push("label".into());
    }
    writeln!(s, "{}", header.join("\t")).expect("write to String");
    for i in 0..z.rows() {
        let mut row: Vec<String> = z.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(l) = graph.labels() {
            row.push(l[i].to_string());
        }
        writeln!(s, "{}", row.join("\t")).expect("write to String");
    }
    write_atomic(out.as_ref(), s.as_bytes())?;
    Ok(z)
}

/// Reads a file written by [`export_embeddings`].
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<(DenseMatrix, Option<Vec<usize>>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))?
        .split('\t')
        .collect();
    let has_label = header.last() == Some(&"label");
    let dim = header.len() - usize::from(has_label);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != header.len() {
            return Err(Error::format(
                path,
                format!("line {}: wrong field count", lineno + 2),
            ));
        }
        let bad =
            |e: &dyn std::fmt::Display| Error::format(path, format!("line {}: {e}", lineno + 2));
        let row = fields[..dim]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| bad(&e)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
        if has_label {
            labels.push(fields[dim].parse::<usize>().map_err(|e| bad(&e))?);
        }
    }
    let z = if rows.is_empty() {
        DenseMatrix::zeros(0, dim)
    } else {
        DenseMatrix::from_rows(&rows)?
    };
    Ok((z, has_label.then_some(labels)))
}
