use super::AttributedGraph;
use crate::error::{Error, Result};
use crate::linalg::{norm, DenseMatrix};

/// One column per distinct node degree (ascending); row `i` is one-hot at
/// the column of `degree(i)`.
pub fn degree_onehot_features(graph: &AttributedGraph) -> DenseMatrix {
    let deg = graph.degrees();
    let mut distinct = deg.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let mut x = DenseMatrix::zeros(graph.n_nodes(), distinct.len().max(1));
    for (i, d) in deg.iter().enumerate() {
        let col = distinct.binary_search(d).expect("degree is listed");
        x.set(i, col, 1.0);
    }
    x
}

/// Scales every nonzero row to unit Euclidean norm. Zero rows stay zero.
pub fn row_normalize(features: &DenseMatrix) -> Result<DenseMatrix> {
    if features.data().iter().any(|v| v.is_nan()) {
        return Err(Error::Data("NaN in feature matrix".into()));
    }
    let mut out = features.clone();
    for i in 0..out.rows() {
        let n = norm(out.row(i));
        if n > 0.0 {
            out.row_mut(i).iter_mut().for_each(|v| *v /= n);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph_has_single_degree_column() {
        let g = AttributedGraph::new("e", 3, [], DenseMatrix::zeros(3, 0), None, 1).unwrap();
        let x = degree_onehot_features(&g);
        assert_eq!(x.shape(), (3, 1));
        assert!(x.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn row_normalize_cases() {
        let x = DenseMatrix::from_rows(&[vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap();
        let y = row_normalize(&x).unwrap();
        assert!((y.get(0, 0) - 0.6).abs() < 1e-15 && (y.get(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(y.row(1), &[0.0, 0.0]);
        let bad = DenseMatrix::from_rows(&[vec![f64::NAN]]).unwrap();
        assert!(matches!(row_normalize(&bad), Err(Error::Data(_))));
    }
}
