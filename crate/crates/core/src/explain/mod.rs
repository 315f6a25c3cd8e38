//! Turning attention weights into cluster- and individual-level explanations.
//!
//! [`AttentionTable`] runs every model of an ensemble over every individual
//! once and keeps the pieces the analyses need; the free functions below
//! aggregate it. Aggregations always run in dataset order (ids sorted), so
//! repeated runs produce identical floating-point sums.

mod correlation;
pub mod export;
mod similarity;
mod temporal;

pub use correlation::{attention_feature_correlation, correlate, pearson, ranks, CorrelationMethod};
pub use similarity::{cluster_similarity_profile, SimilarityKernel, SimilarityRecord};
pub use temporal::{
    attention_focus, average_temporal, received_attention, AveragingAxis, AvgTemporalAttention,
    RenormOrder,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClusterLabels, PaddedDataset};
use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::model::{forward_prepared, prepare};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub averaging_axis: AveragingAxis,
    pub renorm_order: RenormOrder,
    pub correlation: CorrelationMethod,
}

/// What one model says about one individual.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualAttention {
    pub probability: f64,
    /// `A_T_av` over the valid time-points.
    pub avg_temporal: Vec<f64>,
    /// Raw received attention (column means of `A_T` over valid queries).
    pub received: Vec<f64>,
    pub a_f: Matrix,
}

/// Attention of every model for every individual, plus the cluster of each
/// individual in dataset order.
#[derive(Debug, Clone)]
pub struct AttentionTable<'a> {
    pub pd: &'a PaddedDataset,
    pub clusters: Vec<usize>,
    pub k: usize,
    /// `entries[model][individual]`
    pub entries: Vec<Vec<IndividualAttention>>,
    /// Model index used to describe each cluster.
    pub model_of_cluster: Vec<usize>,
    pub config: ExplainConfig,
}

impl<'a> AttentionTable<'a> {
    pub fn compute(
        ens: &EnsembleModel,
        pd: &'a PaddedDataset,
        labels: &ClusterLabels,
        config: ExplainConfig,
    ) -> Result<Self> {
        let clusters = labels.aligned(&pd.ids)?;
        if labels.k() != ens.k {
            return Err(Error::AlignmentError(format!(
                "labels have k = {}, ensemble k = {}",
                labels.k(),
                ens.k
            )));
        }
        let entries = ens
            .models
            .iter()
            .map(|model| {
                (0..pd.len())
                    .into_par_iter()
                    .map(|i| {
                        let mask = &pd.mask[i];
                        let input = prepare(&pd.tensor[i], mask, model.params.d_f)?;
                        let (probability, bundle) = forward_prepared(&model.params, &input)?;
                        let avg = average_temporal(
                            &bundle.a_t,
                            mask,
                            config.averaging_axis,
                            config.renorm_order,
                        )?;
                        Ok(IndividualAttention {
                            probability,
                            avg_temporal: input.valid.iter().map(|&t| avg[t]).collect(),
                            received: received_attention(&bundle.a_t, mask),
                            a_f: bundle.a_f,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pd,
            clusters,
            k: ens.k,
            entries,
            model_of_cluster: (0..ens.k).map(|c| ens.model_index_for_cluster(c)).collect(),
            config,
        })
    }

    pub fn n_models(&self) -> usize {
        self.entries.len()
    }

    fn members(&self, c: usize) -> Vec<usize> {
        (0..self.pd.len()).filter(|&i| self.clusters[i] == c).collect()
    }

    fn valid(&self, i: usize) -> Vec<usize> {
        (0..self.pd.t_pad).filter(|&t| self.pd.mask[i][t]).collect()
    }

    fn index(&self, id: &str) -> Result<usize> {
        self.pd.index_of(id).ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn avg_temporal(&self, model: usize, i: usize) -> AvgTemporalAttention {
        AvgTemporalAttention {
            id: self.pd.ids[i].clone(),
            model,
            weights: self.entries[model][i].avg_temporal.clone(),
        }
    }

    /// Per-feature correlation of `A_T_av` with the feature series.
    pub fn correlations(&self, model: usize, i: usize) -> Result<Vec<f64>> {
        attention_feature_correlation(
            &self.entries[model][i].avg_temporal,
            &self.pd.tensor[i],
            &self.valid(i),
            self.config.correlation,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile {
    pub cluster: usize,
    pub model: usize,
    /// Mean correlation per feature, in feature order.
    pub r: Vec<f64>,
    pub n_individuals: usize,
}

impl CorrelationProfile {
    /// Feature indices ordered by decreasing `|r|` (ties by index).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.r.len()).collect();
        idx.sort_by(|&a, &b| self.r[b].abs().total_cmp(&self.r[a].abs()).then(a.cmp(&b)));
        idx
    }
}

/// For each cluster, the mean per-individual correlation profile of its
/// members under the cluster's own model.
pub fn cluster_correlation_profiles(table: &AttentionTable) -> Result<Vec<CorrelationProfile>> {
    (0..table.k)
        .map(|c| {
            let members = table.members(c);
            if members.is_empty() {
                return Err(Error::EmptyCluster(c));
            }
            let model = table.model_of_cluster[c];
            let mut r = vec![0.0; table.pd.n_features()];
            for &i in &members {
                for (acc, x) in r.iter_mut().zip(table.correlations(model, i)?) {
                    *acc += x;
                }
            }
            r.iter_mut().for_each(|x| *x /= members.len() as f64);
            Ok(CorrelationProfile {
                cluster: c,
                model,
                r,
                n_individuals: members.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionFeatureRecord {
    pub model: usize,
    pub id: String,
    pub true_cluster: usize,
    /// One-hot target of this individual for this model.
    pub class: u8,
    pub probability: f64,
    /// See [`attention_focus`].
    pub attention_focus: f64,
    pub mean_feature: f64,
}

/// One record per individual per model relating attention to the mean of `feature`.
pub fn attention_vs_feature_table(table: &AttentionTable, feature: usize) -> Result<Vec<AttentionFeatureRecord>> {
    let v = table.pd.n_features();
    if feature >= v {
        return Err(Error::BadFeatureIndex { a: feature, b: feature, v });
    }
    let mut out = Vec::with_capacity(table.n_models() * table.pd.len());
    for (m, entries) in table.entries.iter().enumerate() {
        for (i, e) in entries.iter().enumerate() {
            let valid = table.valid(i);
            let mean_feature =
                valid.iter().map(|&t| table.pd.tensor[i][(feature, t)]).sum::<f64>() / valid.len() as f64;
            out.push(AttentionFeatureRecord {
                model: m,
                id: table.pd.ids[i].clone(),
                true_cluster: table.clusters[i],
                class: u8::from(table.clusters[i] == m),
                probability: e.probability,
                attention_focus: attention_focus(&e.received),
                mean_feature,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAttentionHeatmap {
    pub cluster: usize,
    pub model: usize,
    /// Entry `(i, j)`: contribution of feature `j` (x-axis) to feature `i` (y-axis).
    pub matrix: Matrix,
}

impl FeatureAttentionHeatmap {
    pub fn column_means(&self) -> Vec<f64> {
        self.matrix.column_means_over(0..self.matrix.rows())
    }
}

/// Mean `A_F` of each cluster's members under the cluster's own model.
pub fn feature_attention_heatmaps(table: &AttentionTable) -> Result<Vec<FeatureAttentionHeatmap>> {
    let v = table.pd.n_features();
    (0..table.k)
        .map(|c| {
            let members = table.members(c);
            if members.is_empty() {
                return Err(Error::EmptyCluster(c));
            }
            let model = table.model_of_cluster[c];
            let mut acc = Matrix::zeros(v, v);
            for &i in &members {
                for (a, x) in acc.as_mut_slice().iter_mut().zip(table.entries[model][i].a_f.as_slice()) {
                    *a += x;
                }
            }
            acc.scale(1.0 / members.len() as f64);
            Ok(FeatureAttentionHeatmap {
                cluster: c,
                model,
                matrix: acc,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub cluster: usize,
    pub model: usize,
    pub id: String,
    pub time_index: usize,
    pub value_a: f64,
    pub value_b: f64,
    pub weight: f64,
}

fn check_pair(f_a: usize, f_b: usize, v: usize) -> Result<()> {
    if f_a == f_b || f_a >= v || f_b >= v {
        return Err(Error::BadFeatureIndex { a: f_a, b: f_b, v });
    }
    Ok(())
}

/// For every cluster, every member and every valid time-point: the two
/// feature values and the `A_T_av` weight under the cluster's model.
pub fn interaction_table(table: &AttentionTable, f_a: usize, f_b: usize) -> Result<Vec<InteractionRecord>> {
    check_pair(f_a, f_b, table.pd.n_features())?;
    let mut out = Vec::new();
    for c in 0..table.k {
        let model = table.model_of_cluster[c];
        for i in table.members(c) {
            out.extend(interaction_rows(table, model, i, f_a, f_b).into_iter().map(|(t, a, b, w)| {
                InteractionRecord {
                    cluster: c,
                    model,
                    id: table.pd.ids[i].clone(),
                    time_index: t,
                    value_a: a,
                    value_b: b,
                    weight: w,
                }
            }));
        }
    }
    Ok(out)
}

fn interaction_rows(table: &AttentionTable, model: usize, i: usize, f_a: usize, f_b: usize) -> Vec<(usize, f64, f64, f64)> {
    let x = &table.pd.tensor[i];
    table
        .valid(i)
        .into_iter()
        .zip(&table.entries[model][i].avg_temporal)
        .map(|(t, &w)| (t, x[(f_a, t)], x[(f_b, t)], w))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub time_index: usize,
    pub value: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualSummary {
    pub id: String,
    pub cluster: usize,
    pub model: usize,
    /// Per feature, valid time-points by decreasing `A_T_av` weight.
    pub features: Vec<Vec<SummaryEntry>>,
}

pub fn individual_summary(table: &AttentionTable, id: &str) -> Result<IndividualSummary> {
    let i = table.index(id)?;
    let cluster = table.clusters[i];
    let model = table.model_of_cluster[cluster];
    let weights = &table.entries[model][i].avg_temporal;
    let valid = table.valid(i);
    let mut order: Vec<usize> = (0..valid.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let x = &table.pd.tensor[i];
    let features = (0..table.pd.n_features())
        .map(|f| {
            order
                .iter()
                .map(|&k| SummaryEntry {
                    time_index: valid[k],
                    value: x[(f, valid[k])],
                    weight: weights[k],
                })
                .collect()
        })
        .collect();
    Ok(IndividualSummary {
        id: id.to_string(),
        cluster,
        model,
        features,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInteraction {
    pub model: usize,
    /// `(time_index, value_a, value_b, weight)`
    pub rows: Vec<(usize, f64, f64, f64)>,
}

/// The same individual's `(f_a, f_b)` values annotated by every model's `A_T_av`.
pub fn cross_model_comparison(table: &AttentionTable, id: &str, f_a: usize, f_b: usize) -> Result<Vec<ModelInteraction>> {
    let i = table.index(id)?;
    check_pair(f_a, f_b, table.pd.n_features())?;
    Ok((0..table.n_models())
        .map(|model| ModelInteraction {
            model,
            rows: interaction_rows(table, model, i, f_a, f_b),
        })
        .collect())
}

/// Everything the explanation stage produces for one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationBundleOut {
    pub profiles: Vec<CorrelationProfile>,
    pub heatmaps: Vec<FeatureAttentionHeatmap>,
    pub attention_vs_feature: Vec<AttentionFeatureRecord>,
    pub interactions: Vec<InteractionRecord>,
    pub summaries: Vec<IndividualSummary>,
    pub cross_model: Vec<(String, Vec<ModelInteraction>)>,
    pub similarity: Vec<SimilarityRecord>,
}

/// Which feature and individuals the report focuses on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplainTargets {
    pub scatter_feature: usize,
    pub pair: (usize, usize),
    pub individuals: Vec<String>,
}

pub fn explain_all(
    table: &AttentionTable,
    labels: &ClusterLabels,
    targets: &ExplainTargets,
) -> Result<ExplanationBundleOut> {
    let (f_a, f_b) = targets.pair;
    Ok(ExplanationBundleOut {
        profiles: cluster_correlation_profiles(table)?,
        heatmaps: feature_attention_heatmaps(table)?,
        attention_vs_feature: attention_vs_feature_table(table, targets.scatter_feature)?,
        interactions: interaction_table(table, f_a, f_b)?,
        summaries: targets
            .individuals
            .iter()
            .map(|id| individual_summary(table, id))
            .collect::<Result<_>>()?,
        cross_model: targets
            .individuals
            .iter()
            .map(|id| Ok((id.clone(), cross_model_comparison(table, id, f_a, f_b)?)))
            .collect::<Result<_>>()?,
        similarity: cluster_similarity_profile(table.pd, labels, SimilarityKernel::RbfFlat)?,
    })
}
