//! Benchmarks for the hot paths: normalization, assignment, mixing,
//! edit-distance search, and a classifier gradient step.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use smixup_bench::{motif_fixture, random_embedding, random_graph};
use smixup_core::ged::{aligned_ged, exact_ged};
use smixup_core::gnn::{classifier_loss_record, Backbone, GnnConfig, GnnParams};
use smixup_core::matcher::{assignment_matrix, embed_pair, MatcherConfig, Normalizer};
use smixup_core::mixup::{s_mixup_pair, transform_graph};
use smixup_core::numerics::sinkhorn_normalize;
use smixup_core::{Matrix, Metric};

fn bench_normalizers(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sim = Matrix::from_shape_fn((32, 32), |_| {
        use rand::Rng;
        rng.random_range(-1.0..1.0)
    });
    c.bench_function("sinkhorn_32x32", |b| {
        b.iter(|| sinkhorn_normalize(black_box(&sim), 50, 1e-6).unwrap())
    });
}

fn bench_assignment(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g1 = random_graph(&mut rng, 24, 4);
    let g2 = random_graph(&mut rng, 20, 4);
    let cfg = MatcherConfig {
        num_layers: 3,
        hidden: 32,
        ..MatcherConfig::new(4)
    };
    let params = smixup_core::matcher::MatcherParams::init(&cfg, 0).unwrap();
    c.bench_function("matcher_embed_pair_24x20", |b| {
        b.iter(|| embed_pair(black_box(&g1), black_box(&g2), &params, &cfg).unwrap())
    });
    let (h1, h2) = embed_pair(&g1, &g2, &params, &cfg).unwrap();
    c.bench_function("assignment_softmax_24x20", |b| {
        b.iter(|| assignment_matrix(black_box(&h1), black_box(&h2), Metric::Cosine, Normalizer::Softmax).unwrap())
    });
}

fn bench_mixing(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g1 = random_graph(&mut rng, 24, 4);
    let g2 = random_graph(&mut rng, 20, 4);
    let h1 = random_embedding(&mut rng, 24, 8);
    let h2 = random_embedding(&mut rng, 20, 8);
    let m = assignment_matrix(&h1, &h2, Metric::Cosine, Normalizer::Softmax).unwrap();
    c.bench_function("transform_graph_24x20", |b| {
        b.iter(|| transform_graph(black_box(&g2), black_box(&m)).unwrap())
    });
    c.bench_function("s_mixup_pair_24x20", |b| {
        b.iter(|| s_mixup_pair(black_box(&g1), black_box(&g2), black_box(&m), 0.7).unwrap())
    });
}

fn bench_ged(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g1 = random_graph(&mut rng, 6, 2);
    let g2 = random_graph(&mut rng, 6, 2);
    c.bench_function("aligned_ged_6", |b| {
        b.iter(|| aligned_ged(black_box(&g1), black_box(&g1)).unwrap())
    });
    c.bench_function("exact_ged_6x6", |b| {
        b.iter(|| exact_ged(black_box(&g1), black_box(&g2), 8).unwrap())
    });
    let g3 = random_graph(&mut rng, 8, 2);
    let g4 = random_graph(&mut rng, 8, 2);
    c.bench_function("exact_ged_8x8", |b| {
        b.iter(|| exact_ged(black_box(&g3), black_box(&g4), 8).unwrap())
    });
}

fn bench_classifier_step(c: &mut Criterion) {
    let ds = motif_fixture(8);
    let cfg = GnnConfig::new(Backbone::Gin, ds.num_classes(), ds.feature_dim());
    let params = GnnParams::init(&cfg, 0).unwrap();
    let batch: Vec<_> = ds.graphs()[..16].to_vec();
    c.bench_function("classifier_grad_step_gin_b16", |b| {
        b.iter_batched(
            || batch.clone(),
            |batch| {
                let rec = classifier_loss_record(black_box(&batch), &params, &cfg).unwrap();
                rec.gradients().unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(
    benches,
    bench_normalizers,
    bench_assignment,
    bench_mixing,
    bench_ged,
    bench_classifier_step
);
criterion_main!(benches);
