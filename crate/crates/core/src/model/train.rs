use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::params::{ClassWeighting, Hyperparams, ModelParams};
use super::{loss_and_grads_prepared, prepare, PreparedInput};
use crate::data::PaddedDataset;
use crate::ensemble::BinaryLabelVector;
use crate::error::{Error, Result};
use crate::numkit::{adam_step, AdamState};

/// Half-width of the uniform initialisation interval.
pub const INIT_SCALE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    /// Mean training loss of each epoch, evaluated before that epoch's update.
    pub loss_trace: Vec<f64>,
    pub hyper: Hyperparams,
    pub positive_cluster: usize,
    pub feature_names: Vec<String>,
}

pub(crate) fn prepare_all(pd: &PaddedDataset, d_f: usize) -> Result<Vec<PreparedInput>> {
    (0..pd.len())
        .map(|i| prepare(&pd.tensor[i], &pd.mask[i], d_f))
        .collect()
}

fn sample_weights(labels: &[u8], mode: ClassWeighting) -> Vec<f64> {
    match mode {
        ClassWeighting::None => vec![1.0; labels.len()],
        ClassWeighting::Balanced => {
            let n = labels.len() as f64;
            let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
            let neg = n - pos;
            labels
                .iter()
                .map(|&y| if y == 1 { n / (2.0 * pos) } else { n / (2.0 * neg) })
                .collect()
        }
    }
}

/// Full-batch Adam on the mean (optionally class-weighted) cross-entropy.
/// Initialisation is `U(-0.05, 0.05)` from a generator seeded with `hyper.seed`.
pub fn train_model(
    train: &PaddedDataset,
    labels: &BinaryLabelVector,
    hyper: &Hyperparams,
) -> Result<TrainedModel> {
    hyper.validate()?;
    if labels.values.len() != train.len() {
        return Err(Error::AlignmentError(format!(
            "{} labels for {} individuals",
            labels.values.len(),
            train.len()
        )));
    }
    let pos = labels.values.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.values.len() {
        return Err(Error::SingleClassInput);
    }

    let inputs = prepare_all(train, hyper.d_f)?;
    let weights = sample_weights(&labels.values, hyper.class_weighting);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut params = ModelParams::random(
        hyper.variant,
        train.n_features(),
        hyper.d_k,
        hyper.d_f,
        INIT_SCALE,
        &mut rng,
    );
    let mut adam = AdamState::new(params.len(), hyper.lr);
    let n = inputs.len() as f64;
    let mut loss_trace = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        let per_individual: Vec<(f64, Vec<f64>)> = inputs
            .par_iter()
            .zip(labels.values.par_iter())
            .zip(weights.par_iter())
            .map(|((input, &y), &w)| loss_and_grads_prepared(&params, input, y, w))
            .collect::<Result<_>>()?;
        // fixed summation order keeps training bit-reproducible
        let mut loss = 0.0;
        let mut grad = vec![0.0; params.len()];
        for (l, g) in &per_individual {
            loss += l;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        grad.iter_mut().for_each(|g| *g /= n);
        loss_trace.push(loss / n);
        adam_step(&mut params.values, &grad, &mut adam)?;
    }
    if !params.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(TrainedModel {
        params,
        loss_trace,
        hyper: hyper.clone(),
        positive_cluster: labels.positive_cluster,
        feature_names: train.feature_names.clone(),
    })
}
