mod common;

use proptest::prelude::*;
use rand::Rng;
use rgae::linalg::{dot, DenseMatrix, SparseMatrix};
use rgae::model::losses::{
    laplacian_quadratic, pos_weight_and_norm, recon_loss, recon_loss_dense_reference,
    recon_loss_grad, regularizer_r,
};
use rgae::model::ReconWeighting;

fn softplus_ref(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

fn random_case(seed: u64, n: usize, d: usize, scale: f64) -> (DenseMatrix, SparseMatrix) {
    let mut r = common::rng(seed);
    let z = DenseMatrix::from_fn(n, d, |_, _| r.random_range(-scale..scale));
    let mut trip = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random::<f64>() < 0.25 {
                trip.push((u, v, 1.0));
                trip.push((v, u, 1.0));
            }
        }
    }
    (z, SparseMatrix::from_triplets(n, n, trip).unwrap())
}

/// Weighted cross-entropy summed pair by pair with no shortcuts.
fn weighted_ref(z: &DenseMatrix, a: &SparseMatrix) -> f64 {
    let n = z.rows();
    let (w, norm) = pos_weight_and_norm(n, a);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = dot(z.row(i), z.row(j));
            let y = a.get(i, j);
            total += w * y * softplus_ref(-s) + (1.0 - y) * softplus_ref(s);
        }
    }
    norm * total / (n * n) as f64
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn plain_loss_matches_the_log_sigmoid_form() {
    for seed in 0..20 {
        let (z, a) = random_case(seed, 25, 4, 1.0);
        let got = recon_loss(&z, &a, ReconWeighting::Plain).unwrap();
        let want = recon_loss_dense_reference(&z, &a.to_dense());
        assert!(rel(got, want) < 1e-11, "{got} vs {want}");
    }
}

#[test]
fn large_logits_stay_accurate() {
    // Inner products reach several thousand, far past where exp overflows.
    for seed in 0..5 {
        let (z, a) = random_case(seed, 90, 3, 40.0);
        let got = recon_loss(&z, &a, ReconWeighting::PosWeighted).unwrap();
        assert!(got.is_finite());
        assert!(rel(got, weighted_ref(&z, &a)) < 1e-12);
        let (_, g) = recon_loss_grad(&z, &a, ReconWeighting::PosWeighted).unwrap();
        assert!(g.is_finite());
    }
}

#[test]
fn edgeless_target_uses_unit_weights() {
    let a = SparseMatrix::zeros(5, 5);
    assert_eq!(pos_weight_and_norm(5, &a), (1.0, 1.0));
    let z = DenseMatrix::zeros(5, 2);
    // Every logit is 0, so every pair costs ln 2.
    let l = recon_loss(&z, &a, ReconWeighting::PosWeighted).unwrap();
    assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
}

proptest! {
    #[test]
    fn weighted_loss_matches_pairwise_sum(seed in 0u64..1000, n in 2usize..30, scale in 0.01f64..5.0) {
        let (z, a) = random_case(seed, n, 3, scale);
        let got = recon_loss(&z, &a, ReconWeighting::PosWeighted).unwrap();
        prop_assert!(rel(got, weighted_ref(&z, &a)) < 1e-12);
    }

    #[test]
    fn plain_loss_splits_into_laplacian_and_remainder(seed in 0u64..1000, n in 2usize..20) {
        let (z, a) = random_case(seed, n, 3, 1.5);
        let bce = recon_loss(&z, &a, ReconWeighting::Plain).unwrap();
        let split = laplacian_quadratic(&z, &a).unwrap() + regularizer_r(&z, &a).unwrap();
        prop_assert!((bce - split).abs() / (1.0 + bce.abs()) < 1e-10);
        prop_assert!(laplacian_quadratic(&z, &a).unwrap() >= 0.0);
    }
}
