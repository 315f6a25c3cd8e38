use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clusterlens_core::model::{forward, loss_and_grads};
use clusterlens_core::numkit::{masked_softmax_rows, scaled_dot_attention};
use clusterlens_core::{Matrix, ModelParams, Variant};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn softmax(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("masked_softmax");
    for t in [64, 224] {
        let logits = random_matrix(&mut rng, t, t);
        let mask: Vec<bool> = (0..t).map(|j| j < t * 3 / 4).collect();
        group.bench_with_input(BenchmarkId::from_parameter(t), &t, |b, _| {
            b.iter(|| masked_softmax_rows(black_box(&logits), &mask).unwrap())
        });
    }
    group.finish();
}

fn attention(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n, d) = (224, 16);
    let q = random_matrix(&mut rng, n, d);
    let k = random_matrix(&mut rng, n, d);
    let v = random_matrix(&mut rng, n, d);
    let mask = vec![true; n];
    c.bench_function("scaled_dot_attention 224x16", |b| {
        b.iter(|| scaled_dot_attention(black_box(&q), &k, &v, &mask, d).unwrap())
    });
}

fn model_passes(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (v, t) = (12, 224);
    let x = random_matrix(&mut rng, v, t);
    let mask: Vec<bool> = (0..t).map(|j| j < 157).collect();
    let mut group = c.benchmark_group("model");
    for variant in Variant::ALL {
        let p = ModelParams::random(variant, v, 16, 8, 0.05, &mut rng);
        group.bench_function(BenchmarkId::new("forward", variant), |b| {
            b.iter(|| forward(black_box(&p), &x, &mask).unwrap())
        });
        group.bench_function(BenchmarkId::new("loss_and_grads", variant), |b| {
            b.iter(|| loss_and_grads(black_box(&p), &x, &mask, 1, 1.0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, softmax, attention, model_passes);
criterion_main!(benches);
