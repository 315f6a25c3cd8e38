//! One-vs-rest orchestration over cluster labels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClusterLabels, PaddedDataset};
use crate::error::{Error, Result};
use crate::model::{decide, prepare, probability, train_model, Hyperparams, TrainedModel, Variant};

/// Binary target of one model: 1 for members of `positive_cluster`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryLabelVector {
    pub values: Vec<u8>,
    pub positive_cluster: usize,
}

/// One binary vector per cluster, aligned to `order`. With two clusters the
/// labels are already binary and only the vector for cluster 0 is returned.
pub fn one_hot(labels: &ClusterLabels, order: &[String]) -> Result<Vec<BinaryLabelVector>> {
    let clusters = labels.aligned(order)?;
    let n_models = if labels.k() == 2 { 1 } else { labels.k() };
    Ok((0..n_models)
        .map(|c| BinaryLabelVector {
            values: clusters.iter().map(|&x| u8::from(x == c)).collect(),
            positive_cluster: c,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    /// Model `i` predicts membership of cluster `i`.
    pub models: Vec<TrainedModel>,
    pub k: usize,
}

impl EnsembleModel {
    pub fn new(models: Vec<TrainedModel>, k: usize) -> Result<Self> {
        let expected = if k == 2 { 1 } else { k };
        if models.len() != expected {
            return Err(Error::AlignmentError(format!(
                "{} models for k = {k}, expected {expected}",
                models.len()
            )));
        }
        if let Some((i, _)) = models.iter().enumerate().find(|(i, m)| m.positive_cluster != *i) {
            return Err(Error::AlignmentError(format!("model {i} is not trained for cluster {i}")));
        }
        Ok(Self { models, k })
    }

    pub fn variant(&self) -> Variant {
        self.models[0].hyper.variant
    }

    /// Index of the model describing cluster `c`; with two clusters the single
    /// model describes both.
    pub fn model_index_for_cluster(&self, c: usize) -> usize {
        c.min(self.models.len() - 1)
    }

    pub fn model_for_cluster(&self, c: usize) -> &TrainedModel {
        &self.models[self.model_index_for_cluster(c)]
    }
}

/// Trains one model per one-hot vector, model `i` with seed `hyper.seed + i`.
pub fn train_ensemble(
    train: &PaddedDataset,
    labels: &ClusterLabels,
    hyper: &Hyperparams,
) -> Result<EnsembleModel> {
    let clusters = labels.aligned(&train.ids)?;
    let mut sizes = vec![0usize; labels.k()];
    clusters.iter().for_each(|&c| sizes[c] += 1);
    if let Some((cluster, &size)) = sizes.iter().enumerate().find(|(_, &s)| s < 2) {
        return Err(Error::TinyCluster { cluster, size });
    }
    let models = one_hot(labels, &train.ids)?
        .iter()
        .enumerate()
        .map(|(i, target)| {
            let h = Hyperparams {
                seed: hyper.seed.wrapping_add(i as u64),
                ..hyper.clone()
            };
            train_model(train, target, &h)
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleModel::new(models, labels.k())
}

/// Probabilities of one model over a whole dataset, in dataset order.
pub fn predict_probabilities(model: &TrainedModel, pd: &PaddedDataset) -> Result<Vec<f64>> {
    (0..pd.len())
        .into_par_iter()
        .map(|i| {
            let input = prepare(&pd.tensor[i], &pd.mask[i], model.params.d_f)?;
            probability(&model.params, &input)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAccuracy {
    pub positive_cluster: usize,
    pub train_correct: usize,
    pub test_correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantAccuracy {
    pub variant: Variant,
    pub per_model: Vec<ModelAccuracy>,
    pub mean_train_correct: f64,
    pub mean_test_correct: f64,
}

/// Correctly classified individuals out of `n`, per model and averaged over models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n: usize,
    pub rows: Vec<VariantAccuracy>,
}

impl AccuracyReport {
    pub fn merge(mut self, other: AccuracyReport) -> Result<AccuracyReport> {
        if self.n != other.n {
            return Err(Error::AlignmentError("reports over different N".into()));
        }
        self.rows.extend(other.rows);
        Ok(self)
    }

    pub fn row(&self, variant: Variant) -> Option<&VariantAccuracy> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// Plain-text table with one line per variant, baseline first.
    pub fn to_table(&self) -> String {
        let label = |v: Variant| match v {
            Variant::RecurrentBaseline => "Baseline GRU",
            Variant::TemporalOnly => "Temporal-Attention",
            Variant::Dual => "Dual-Attention (proposed)",
        };
        let mut out = format!("{:<28}{:>20}{:>16}\n", "Model", "Training Accuracy", "Test Accuracy");
        for v in Variant::ALL {
            if let Some(r) = self.row(v) {
                let train = format!("{}/{}", r.mean_train_correct.round() as usize, self.n);
                let test = format!("{}/{}", r.mean_test_correct.round() as usize, self.n);
                out.push_str(&format!("{:<28}{:>20}{:>16}\n", label(v), train, test));
            }
        }
        out
    }
}

fn count_correct(model: &TrainedModel, pd: &PaddedDataset, target: &[u8]) -> Result<usize> {
    let probs = predict_probabilities(model, pd)?;
    Ok(probs.iter().zip(target).filter(|(&p, &y)| decide(p) == y).count())
}

/// Per model `i`, an individual counts as correct when the predicted binary
/// label equals its one-hot target `i`.
pub fn evaluate(
    ens: &EnsembleModel,
    train: &PaddedDataset,
    test: &PaddedDataset,
    labels: &ClusterLabels,
) -> Result<AccuracyReport> {
    if test.is_empty() || train.is_empty() {
        return Err(Error::AlignmentError("empty evaluation split".into()));
    }
    if train.ids != test.ids {
        return Err(Error::AlignmentError("train and test splits list different individuals".into()));
    }
    let targets = one_hot(labels, &train.ids)?;
    let per_model = ens
        .models
        .iter()
        .zip(&targets)
        .map(|(m, t)| {
            Ok(ModelAccuracy {
                positive_cluster: t.positive_cluster,
                train_correct: count_correct(m, train, &t.values)?,
                test_correct: count_correct(m, test, &t.values)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let k = per_model.len() as f64;
    let mean_train_correct = per_model.iter().map(|m| m.train_correct as f64).sum::<f64>() / k;
    let mean_test_correct = per_model.iter().map(|m| m.test_correct as f64).sum::<f64>() / k;
    Ok(AccuracyReport {
        n: train.len(),
        rows: vec![VariantAccuracy {
            variant: ens.variant(),
            per_model,
            mean_train_correct,
            mean_test_correct,
        }],
    })
}
