use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::SelfSupervisionGraph;

/// Link counts of a rewritten graph split by label agreement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolutionStats {
    pub links_total: usize,
    /// Links between nodes with the same true label.
    pub links_true: usize,
    pub links_false: usize,
    pub links_added_true: usize,
    pub links_added_false: usize,
    pub links_deleted_true: usize,
    pub links_deleted_false: usize,
}

pub fn graph_evolution_stats(
    graph: &SelfSupervisionGraph,
    labels: &[usize],
) -> Result<EvolutionStats> {
    if labels.len() != graph.n_nodes() {
        return Err(Error::Shape(format!(
            "{} labels for {} nodes",
            labels.len(),
            graph.n_nodes()
        )));
    }
    let same = |&(u, v): &(usize, usize)| labels[u] == labels[v];
    let mut s = EvolutionStats {
        links_total: graph.n_edges(),
        ..Default::default()
    };
    s.links_true = graph.edges().iter().filter(|e| same(e)).count();
    s.links_false = s.links_total - s.links_true;
    for e in graph.added() {
        if same(&e) {
            s.links_added_true += 1;
        } else {
            s.links_added_false += 1;
        }
    }
    for e in graph.deleted() {
        if same(e) {
            s.links_deleted_true += 1;
        } else {
            s.links_deleted_false += 1;
        }
    }
    Ok(s)
}

/// Prefix sums of `a − b` divided by their largest magnitude, so the curve
/// lies in `[−1, 1]`. An all-zero prefix sequence stays zero.
pub fn cumulative_difference(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "series of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut acc = 0.0;
    let prefix: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            acc += x - y;
            acc
        })
        .collect();
    let max = prefix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(vec![0.0; prefix.len()]);
    }
    Ok(prefix.into_iter().map(|v| v / max).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_series_give_zero() {
        assert_eq!(
            cumulative_difference(&[0.3, 0.5], &[0.3, 0.5]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn constant_gap_rises_linearly() {
        let c = cumulative_difference(&[1.0; 4], &[0.5; 4]).unwrap();
        assert_eq!(c, vec![0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn unchanged_graph_has_no_edits() {
        let g = SelfSupervisionGraph::identity(3, &[(0, 1), (1, 2)]);
        let s = graph_evolution_stats(&g, &[0, 0, 1]).unwrap();
        assert_eq!((s.links_total, s.links_true, s.links_false), (2, 1, 1));
        assert_eq!(
            s.links_added_true + s.links_added_false + s.links_deleted_true + s.links_deleted_false,
            0
        );
    }
}
