use std::hint::black_box;

use criterion::{Criterion, criterion_group, criterion_main};

use lexcl_bench::{blobs, random_batch};
use lexcl_core::clustering::{agglomerative_cluster, xmeans_cluster};
use lexcl_core::encoder::embed_span;
use lexcl_core::lexicon::Span;
use lexcl_core::metrics::{LabeledPartition, bcubed_scores, purity_scores};
use lexcl_core::postprocess::{fit_projection, project};
use lexcl_core::toy::ToyEncoder;
use lexcl_core::trainer::{Similarity, batch_loss_with_grad};

fn bench_loss(c: &mut Criterion) {
    let (embs, labels) = random_batch(64, 128, 6, 1);
    c.bench_function("batch_loss_with_grad n=64 d=128", |b| {
        b.iter(|| {
            batch_loss_with_grad(black_box(&embs), black_box(&labels), 0.5, Similarity::Cosine)
                .unwrap()
        })
    });
}

fn bench_clustering(c: &mut Criterion) {
    let points = blobs(6, 40, 32, 2);
    c.bench_function("xmeans 240 points d=32", |b| {
        b.iter(|| xmeans_cluster(black_box(&points), 1, 15, 7))
    });
    let centroids = blobs(12, 25, 32, 3);
    c.bench_function("group-average 300 points d=32", |b| {
        b.iter(|| agglomerative_cluster(black_box(&centroids), 0.4))
    });
}

fn bench_metrics(c: &mut Criterion) {
    let (system, gold): (Vec<usize>, Vec<usize>) = {
        let (_, s) = random_batch(5000, 1, 40, 4);
        let (_, g) = random_batch(5000, 1, 30, 5);
        (s, g)
    };
    let part = LabeledPartition { system, gold };
    c.bench_function("purity+bcubed 5000 items", |b| {
        b.iter(|| {
            (purity_scores(black_box(&part)).unwrap(), bcubed_scores(black_box(&part)).unwrap())
        })
    });
}

fn bench_pca(c: &mut Criterion) {
    let data = blobs(1, 400, 64, 6);
    c.bench_function("pca fit 400x64 -> 16", |b| {
        b.iter(|| fit_projection(black_box(&data), 16, true).unwrap())
    });
    let proj = fit_projection(&data, 16, true).unwrap();
    c.bench_function("pca project one vector", |b| {
        b.iter(|| project(black_box(&proj), black_box(&data[0])).unwrap())
    });
}

fn bench_encoder(c: &mut Criterion) {
    let enc = ToyEncoder::new(32, 4, 7);
    let sentence = "the committee will deliberate over the proposal throughout the long evening";
    let span = Span::new(19, 29);
    c.bench_function("toy encoder target embedding", |b| {
        b.iter(|| embed_span(&enc, black_box(sentence), span, 4, false).unwrap())
    });
}

criterion_group!(benches, bench_loss, bench_clustering, bench_metrics, bench_pca, bench_encoder);
criterion_main!(benches);
