use serde::{Deserialize, Serialize};

use crate::data::{ClusterLabels, PaddedDataset};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKernel {
    /// `exp(-d² / 2σ²)` on the flattened series over jointly valid
    /// time-points, `σ` the median pairwise distance.
    #[default]
    RbfFlat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRecord {
    pub id: String,
    pub cluster: usize,
    /// Mean similarity to the members of each cluster, self excluded; `None`
    /// when the cluster has no other member.
    pub mean_similarity: Vec<Option<f64>>,
}

fn sq_distance(pd: &PaddedDataset, i: usize, j: usize) -> f64 {
    let (a, b) = (&pd.tensor[i], &pd.tensor[j]);
    let mut d = 0.0;
    for t in 0..pd.t_pad {
        if pd.mask[i][t] && pd.mask[j][t] {
            for f in 0..pd.n_features() {
                d += (a[(f, t)] - b[(f, t)]).powi(2);
            }
        }
    }
    d
}

pub fn similarity_matrix(pd: &PaddedDataset) -> Vec<Vec<f64>> {
    let n = pd.len();
    let mut d2 = vec![vec![0.0; n]; n];
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_distance(pd, i, j);
            d2[i][j] = d;
            d2[j][i] = d;
            dists.push(d.sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let sigma = match dists.len() {
        0 => 0.0,
        m if m % 2 == 1 => dists[m / 2],
        m => 0.5 * (dists[m / 2 - 1] + dists[m / 2]),
    };
    d2.iter()
        .map(|row| {
            row.iter()
                .map(|&d| {
                    if sigma > 0.0 {
                        (-d / (2.0 * sigma * sigma)).exp()
                    } else if d == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Per individual, the mean kernel similarity to every cluster.
pub fn cluster_similarity_profile(
    pd: &PaddedDataset,
    labels: &ClusterLabels,
    kernel: SimilarityKernel,
) -> Result<Vec<SimilarityRecord>> {
    let SimilarityKernel::RbfFlat = kernel;
    let clusters = labels.aligned(&pd.ids)?;
    let sim = similarity_matrix(pd);
    Ok((0..pd.len())
        .map(|i| {
            let mean_similarity = (0..labels.k())
                .map(|c| {
                    let others: Vec<f64> = (0..pd.len())
                        .filter(|&j| j != i && clusters[j] == c)
                        .map(|j| sim[i][j])
                        .collect();
                    (!others.is_empty()).then(|| others.iter().sum::<f64>() / others.len() as f64)
                })
                .collect();
            SimilarityRecord {
                id: pd.ids[i].clone(),
                cluster: clusters[i],
                mean_similarity,
            }
        })
        .collect())
}
