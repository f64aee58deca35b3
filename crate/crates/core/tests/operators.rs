mod common;

use common::{acc_by_enumeration, random_stochastic, rng, upsilon_sim, xi_brute};
use proptest::prelude::*;
use rand::Rng;
use rgae::cluster::{evaluate_clustering, hungarian_map, map_truth_to_pred};
use rgae::linalg::DenseMatrix;
use rgae::operators::{
    compute_centroid_nodes, upsilon_transform, xi_select_soft, CentroidNodes, UpsilonOptions,
};

#[test]
fn xi_matches_sorted_row_filter() {
    let mut r = rng(3);
    for k in 2..=6 {
        let p = random_stochastic(&mut r, 200, k);
        for &(a1, a2) in &[(0.3, 0.15), (0.0, 0.0), (0.5, 0.25), (1.0, 0.5), (0.2, 0.0)] {
            let got = xi_select_soft(&p, a1, a2).unwrap();
            assert_eq!(got.omega, xi_brute(&p, a1, a2), "k={k} a1={a1} a2={a2}");
        }
    }
}

type Instance = (
    usize,
    Vec<(usize, usize)>,
    Vec<usize>,
    Vec<usize>,
    DenseMatrix,
    usize,
);

fn random_instance(r: &mut rand_chacha::ChaCha8Rng) -> Instance {
    let n = r.random_range(2..=20);
    let k = r.random_range(1..=4);
    let density: f64 = r.random_range(0.05..0.5);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random::<f64>() < density {
                edges.push((u, v));
            }
        }
    }
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
    let omega: Vec<usize> = (0..n).filter(|_| r.random::<f64>() < 0.6).collect();
    let z = DenseMatrix::from_fn(n, 3, |_, _| r.random_range(-1.0..1.0));
    (n, edges, labels, omega, z, k)
}

#[test]
fn upsilon_matches_pseudocode_simulator() {
    let mut r = rng(17);
    let mut checked = 0;
    while checked < 200 {
        let (n, edges, labels, omega, z, k) = random_instance(&mut r);
        let Ok(pi) = compute_centroid_nodes(&z, &labels, &omega, k) else {
            continue;
        };
        let got =
            upsilon_transform(n, &edges, &labels, &omega, &pi, UpsilonOptions::default()).unwrap();
        let want = upsilon_sim(n, &edges, &labels, &omega, &pi);
        assert_eq!(got.edges(), want.edges.as_slice());
        assert_eq!(got.tags(), want.tags.as_slice());
        assert_eq!(got.deleted(), want.deleted.as_slice());
        checked += 1;
    }
}

#[test]
fn upsilon_centroid_with_other_label_adds_nothing() {
    // The centroid of cluster 0 is labeled 1, so no edge to it is added.
    let pi = CentroidNodes {
        pi: vec![Some(2), Some(2)],
    };
    let g = upsilon_transform(
        3,
        &[],
        &[0, 0, 1],
        &[0, 1, 2],
        &pi,
        UpsilonOptions::default(),
    )
    .unwrap();
    assert_eq!(g.n_edges(), 0);
}

#[test]
fn upsilon_toggles_disable_each_edit() {
    let edges = [(0, 3), (1, 2)];
    let labels = [0, 0, 1, 1];
    let omega = [0, 1, 2, 3];
    let pi = CentroidNodes {
        pi: vec![Some(0), Some(3)],
    };
    let only_add = UpsilonOptions {
        add_edges: true,
        drop_edges: false,
    };
    let only_drop = UpsilonOptions {
        add_edges: false,
        drop_edges: true,
    };
    let a = upsilon_transform(4, &edges, &labels, &omega, &pi, only_add).unwrap();
    assert!(a.deleted().is_empty());
    assert_eq!(a.added().collect::<Vec<_>>(), vec![(0, 1), (2, 3)]);
    let d = upsilon_transform(4, &edges, &labels, &omega, &pi, only_drop).unwrap();
    assert_eq!(d.added().count(), 0);
    assert_eq!(d.deleted(), &[(0, 3), (1, 2)]);
}

#[test]
fn hungarian_matches_enumeration() {
    let mut r = rng(5);
    for k in 1..=6 {
        for _ in 0..30 {
            let n = r.random_range(k..40);
            let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
            let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
            let acc = evaluate_clustering(&pred, &truth, k).unwrap().acc;
            assert!((acc - acc_by_enumeration(&truth, &pred, k)).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn xi_is_monotone_in_thresholds(seed in 0u64..1000, k in 2usize..6, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = random_stochastic(&mut rng(seed), 30, k);
        let (lo, hi) = (a.min(b), a.max(b));
        let loose = xi_select_soft(&p, lo, lo / 2.0).unwrap();
        let strict = xi_select_soft(&p, hi, hi / 2.0).unwrap();
        prop_assert!(strict.omega.iter().all(|i| loose.contains(*i)));
        prop_assert_eq!(xi_select_soft(&p, 0.0, 0.0).unwrap().len(), 30);
    }

    #[test]
    fn upsilon_keeps_same_cluster_edges_and_stays_simple(seed in 0u64..500) {
        let mut r = rng(seed);
        let (n, edges, labels, omega, z, k) = random_instance(&mut r);
        prop_assume!(!omega.is_empty());
        let pi = compute_centroid_nodes(&z, &labels, &omega, k).unwrap();
        let g = upsilon_transform(n, &edges, &labels, &omega, &pi, UpsilonOptions::default()).unwrap();
        for &(u, v) in g.edges() {
            prop_assert!(u < v);
        }
        for &(u, v) in &edges {
            if labels[u] == labels[v] {
                prop_assert!(g.has_edge(u, v));
            }
        }
        for &(u, v) in g.deleted() {
            prop_assert!(omega.contains(&u) && omega.contains(&v) && labels[u] != labels[v]);
        }
        for (u, v) in g.added() {
            prop_assert_eq!(labels[u], labels[v]);
        }
        let again = upsilon_transform(n, g.edges(), &labels, &omega, &pi, UpsilonOptions::default()).unwrap();
        prop_assert!(again.deleted().is_empty());
    }

    #[test]
    fn hungarian_recovers_a_relabeling(seed in 0u64..1000, k in 1usize..7) {
        let mut r = rng(seed);
        let truth: Vec<usize> = (0..50).map(|_| r.random_range(0..k)).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let pred: Vec<usize> = truth.iter().map(|&t| perm[t]).collect();
        let pi = hungarian_map(&truth, &pred, k).unwrap();
        prop_assert_eq!(map_truth_to_pred(&truth, &pi), pred.clone());
        prop_assert_eq!(evaluate_clustering(&pred, &truth, k).unwrap().acc, 1.0);
    }
}
