use criterion::{criterion_group, criterion_main, Criterion};

use clusterlens_core::data::{normalize_per_individual, pad_and_mask, temporal_split};
use clusterlens_core::ensemble::one_hot;
use clusterlens_core::model::train_model;
use clusterlens_core::synth::{generate, GroundTruthSpec, SignalKind, SynthConfig};
use clusterlens_core::{Hyperparams, Normalization, Variant};

// Ten epochs on the default 60-individual synthetic set.
fn ten_epochs(c: &mut Criterion) {
    let cfg = SynthConfig::default();
    let spec = GroundTruthSpec::planted(cfg.k, cfg.v, SignalKind::MeanShift, 0.3);
    let (ds, labels, _) = generate(&cfg, &spec).unwrap();
    let pd = pad_and_mask(&normalize_per_individual(&ds, Normalization::MinMax), None).unwrap();
    let (train, _) = temporal_split(&pd, 0.7).unwrap();
    let target = one_hot(&labels, &train.ids).unwrap().remove(0);

    let mut group = c.benchmark_group("train_10_epochs");
    group.sample_size(10);
    for variant in Variant::ALL {
        let hyper = Hyperparams {
            variant,
            epochs: 10,
            ..Default::default()
        };
        group.bench_function(variant.name(), |b| b.iter(|| train_model(&train, &target, &hyper).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, ten_epochs);
criterion_main!(benches);
