//! Hot kernels under the rayon backend and the sequential fallback.
//!
//! Benchmark ids do not depend on the backend, so the two builds can be
//! compared through criterion baselines:
//!
//! ```text
//! cargo bench -p rgae-core --no-default-features -- --save-baseline sequential
//! cargo bench -p rgae-core -- --baseline sequential
//! ```
//!
//! With the rayon backend each kernel additionally runs inside a
//! one-thread pool (`.../pool1`) next to the global pool (`.../pool`).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rgae::cluster::{kmeans_with, student_t_assign, KMeansOptions};
use rgae::harness::{planted_partition, prepare_input};
use rgae::linalg::DenseMatrix;
use rgae::model::losses::recon_loss_grad;
use rgae::model::{Arch, GaeModel, ReconWeighting};

const N: usize = 1500;

fn embedding(n: usize, d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, d, |i, j| {
        (((i * 31 + j * 17) % 97) as f64 / 97.0 - 0.5) * 2.0
    })
}

/// Runs `f` in each available execution mode.
fn modes(c: &mut Criterion, name: &str, mut f: impl FnMut() + Send) {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    group.bench_function(BenchmarkId::from_parameter("pool"), |b| b.iter(&mut f));
    #[cfg(feature = "parallel")]
    {
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function(BenchmarkId::from_parameter("pool1"), |b| {
            b.iter(|| one.install(&mut f))
        });
    }
    group.finish();
}

fn kernels(c: &mut Criterion) {
    let graph = planted_partition(&[N / 3; 3], 0.02, 0.002, 1).unwrap();
    let a = graph.adjacency();
    let input = prepare_input(&graph, true).unwrap();
    let model = GaeModel::with_default_dims(Arch::Gae, graph.n_features(), 1);
    let z = embedding(N, 16);
    let centers = embedding(7, 16);

    modes(c, "spmm", || {
        std::hint::black_box(input.propagation().spmm(&z).unwrap());
    });
    modes(c, "matmul_t", || {
        std::hint::black_box(z.matmul_t(&z).unwrap());
    });
    modes(c, "encode", || {
        std::hint::black_box(model.encode(&input).unwrap());
    });
    modes(c, "recon_loss_grad", || {
        std::hint::black_box(recon_loss_grad(&z, &a, ReconWeighting::PosWeighted).unwrap());
    });
    modes(c, "student_t_assign", || {
        std::hint::black_box(student_t_assign(&z, &centers).unwrap());
    });
    let opts = KMeansOptions {
        n_init: 1,
        ..KMeansOptions::default()
    };
    modes(c, "kmeans", || {
        std::hint::black_box(kmeans_with(&z, 7, 0, &opts).unwrap());
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
