use std::collections::BTreeMap;

use clusterlens_core::data::{normalize_per_individual, pad_and_mask, temporal_split};
use clusterlens_core::ensemble::{evaluate, one_hot, train_ensemble};
use clusterlens_core::model::{train_model, Checkpoint};
use clusterlens_core::synth::{generate, GroundTruthSpec, SignalKind, SynthConfig};
use clusterlens_core::{
    ClusterLabels, EnsembleModel, Error, Hyperparams, ModelParams, Normalization, PaddedDataset, TrainedModel,
    Variant,
};

fn split(cfg: &SynthConfig, amplitude: f64) -> (PaddedDataset, PaddedDataset, ClusterLabels) {
    let spec = GroundTruthSpec::planted(cfg.k, cfg.v, SignalKind::MeanShift, amplitude);
    let (ds, labels, _) = generate(cfg, &spec).unwrap();
    let pd = pad_and_mask(&normalize_per_individual(&ds, Normalization::MinMax), None).unwrap();
    let (train, test) = temporal_split(&pd, 0.7).unwrap();
    (train, test, labels)
}

fn small(k: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        n_per_cluster: 6,
        k,
        t_range: (30, 45),
        seed,
        ..Default::default()
    }
}

#[test]
fn training_is_bitwise_deterministic() {
    let (train, _, labels) = split(&small(3, 11), 0.3);
    let target = &one_hot(&labels, &train.ids).unwrap()[1];
    for variant in Variant::ALL {
        let h = Hyperparams {
            variant,
            epochs: 15,
            seed: 5,
            ..Default::default()
        };
        let a = train_model(&train, target, &h).unwrap();
        let b = train_model(&train, target, &h).unwrap();
        let bits = |m: &TrainedModel| m.loss_trace.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b), "{variant}");
        assert_eq!(a.params, b.params, "{variant}");
        let c = train_model(&train, target, &Hyperparams { seed: 6, ..h }).unwrap();
        assert_ne!(bits(&a), bits(&c), "{variant}");
    }
}

#[test]
fn loss_decreases_on_planted_data() {
    let (train, _, labels) = split(&small(3, 2), 0.3);
    let target = &one_hot(&labels, &train.ids).unwrap()[0];
    let h = Hyperparams {
        epochs: 60,
        lr: 0.02,
        ..Default::default()
    };
    let m = train_model(&train, target, &h).unwrap();
    assert_eq!(m.loss_trace.len(), 60);
    assert!(m.loss_trace[59] < 0.5 * m.loss_trace[0], "{:?}", m.loss_trace);
}

#[test]
fn separable_data_is_fit_perfectly() {
    // A shift of 3 noise-free Likert steps across a fifth of the series is
    // linearly separable on the planted feature's mean alone.
    let cfg = SynthConfig {
        noise_sd: 0.0,
        ..small(2, 8)
    };
    let (train, test, labels) = split(&cfg, 3.0);
    let h = Hyperparams {
        epochs: 500,
        lr: 0.01,
        ..Default::default()
    };
    let ens = train_ensemble(&train, &labels, &h).unwrap();
    let report = evaluate(&ens, &train, &test, &labels).unwrap();
    assert_eq!(report.rows[0].per_model[0].train_correct, train.len());
}

#[test]
fn three_clusters_give_three_models_and_two_give_one() {
    let h = Hyperparams {
        epochs: 3,
        ..Default::default()
    };
    let (train, _, labels) = split(&small(3, 1), 0.3);
    let ens = train_ensemble(&train, &labels, &h).unwrap();
    assert_eq!(ens.models.len(), 3);
    assert_eq!(
        ens.models.iter().map(|m| m.positive_cluster).collect::<Vec<_>>(),
        vec![0, 1, 2]
    );
    let seeds: Vec<u64> = ens.models.iter().map(|m| m.hyper.seed).collect();
    assert_eq!(seeds, vec![0, 1, 2]);

    let (train, _, labels) = split(&small(2, 1), 0.3);
    let ens = train_ensemble(&train, &labels, &h).unwrap();
    assert_eq!(ens.models.len(), 1);
    assert_eq!(ens.model_index_for_cluster(0), 0);
    assert_eq!(ens.model_index_for_cluster(1), 0);
}

#[test]
fn a_cluster_of_one_is_rejected() {
    let cfg = SynthConfig {
        cluster_sizes: Some(vec![5, 1, 5]),
        ..small(3, 1)
    };
    let (train, _, labels) = split(&cfg, 0.3);
    let err = train_ensemble(&train, &labels, &Hyperparams::default()).unwrap_err();
    assert!(matches!(err, Error::TinyCluster { cluster: 1, size: 1 }), "{err}");
}

/// A model whose output is always close to 0: zero weights and a very
/// negative bias.
fn constant_negative(variant: Variant, v: usize, positive_cluster: usize) -> TrainedModel {
    let mut params = ModelParams::zeros(variant, v, 16, 8);
    let b = params.find("head.b").unwrap();
    params.values[b.offset] = -20.0;
    TrainedModel {
        params,
        loss_trace: vec![],
        hyper: Hyperparams {
            variant,
            ..Default::default()
        },
        positive_cluster,
        feature_names: (0..v).map(|i| format!("f{i}")).collect(),
    }
}

#[test]
fn constant_negative_models_score_the_negatives() {
    let cfg = SynthConfig {
        n_per_cluster: 20,
        t_range: (20, 30),
        ..Default::default()
    };
    let (train, test, labels) = split(&cfg, 0.3);
    for variant in Variant::ALL {
        let models = (0..3).map(|c| constant_negative(variant, 12, c)).collect();
        let ens = EnsembleModel::new(models, 3).unwrap();
        let report = evaluate(&ens, &train, &test, &labels).unwrap();
        for m in &report.rows[0].per_model {
            assert_eq!((m.train_correct, m.test_correct), (40, 40), "{variant}");
        }
        assert_eq!(report.rows[0].mean_train_correct, 40.0);
    }
}

#[test]
fn evaluation_rejects_an_empty_test_split() {
    let (train, _, labels) = split(&small(3, 1), 0.3);
    let ens = EnsembleModel::new((0..3).map(|c| constant_negative(Variant::Dual, 12, c)).collect(), 3).unwrap();
    let empty = train.select(&[]);
    assert!(matches!(
        evaluate(&ens, &train, &empty, &labels),
        Err(Error::AlignmentError(_))
    ));
}

#[test]
fn trained_checkpoint_reloads_to_the_same_predictions() {
    let (train, _, labels) = split(&small(3, 3), 0.3);
    let h = Hyperparams {
        epochs: 10,
        ..Default::default()
    };
    let ens = train_ensemble(&train, &labels, &h).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, Checkpoint::from(&ens.models[2]).to_json().unwrap()).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ens.models[2]);
    let p = |m: &TrainedModel| clusterlens_core::ensemble::predict_probabilities(m, &train).unwrap();
    assert_eq!(p(&back), p(&ens.models[2]));
}

#[test]
fn labels_from_a_map_must_cover_the_split() {
    let (train, test, labels) = split(&small(3, 1), 0.3);
    let mut partial: BTreeMap<String, usize> = labels.iter().map(|(id, c)| (id.to_string(), c)).collect();
    let dropped = partial.keys().next().unwrap().clone();
    partial.remove(&dropped);
    let partial = ClusterLabels::new(partial, 3).unwrap();
    let ens = EnsembleModel::new((0..3).map(|c| constant_negative(Variant::Dual, 12, c)).collect(), 3).unwrap();
    assert!(matches!(
        evaluate(&ens, &train, &test, &partial),
        Err(Error::MissingId(id)) if id == dropped
    ));
}
