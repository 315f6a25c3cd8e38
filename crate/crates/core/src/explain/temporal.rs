use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Which axis of `A_T` is averaged away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingAxis {
    /// Mean over query rows: attention received by each time-point.
    #[default]
    Received,
    /// Mean over key columns: attention given by each time-point.
    Given,
}

/// Whether the retained axis is normalised after averaging or the averaged
/// axis is normalised first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenormOrder {
    #[default]
    AfterAveraging,
    BeforeAveraging,
}

/// `A_T_av` of one individual under one model, restricted to valid time-points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvgTemporalAttention {
    pub id: String,
    pub model: usize,
    pub weights: Vec<f64>,
}

/// Collapses a `T x T` temporal attention matrix to one weight per time-point.
/// The result has length `T`, sums to one and is zero at padded positions.
pub fn average_temporal(
    a_t: &Matrix,
    mask: &[bool],
    axis: AveragingAxis,
    order: RenormOrder,
) -> Result<Vec<f64>> {
    let t = mask.len();
    if a_t.rows() != t || a_t.cols() != t {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} attention with mask of {t}",
            a_t.rows(),
            a_t.cols()
        )));
    }
    let valid: Vec<usize> = (0..t).filter(|&j| mask[j]).collect();
    if valid.is_empty() {
        return Err(Error::NoValidRows);
    }
    // entry (row, col) of the valid block, oriented so that we average over `row`
    let at = |avg: usize, keep: usize| match axis {
        AveragingAxis::Received => a_t[(avg, keep)],
        AveragingAxis::Given => a_t[(keep, avg)],
    };
    let mut out = vec![0.0; t];
    for &avg in &valid {
        let norm = match order {
            RenormOrder::AfterAveraging => 1.0,
            RenormOrder::BeforeAveraging => {
                let s: f64 = valid.iter().map(|&keep| at(avg, keep)).sum();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            }
        };
        for &keep in &valid {
            out[keep] += at(avg, keep) / norm;
        }
    }
    let n = valid.len() as f64;
    out.iter_mut().for_each(|w| *w /= n);
    let total: f64 = out.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NoValidRows);
    }
    out.iter_mut().for_each(|w| *w /= total);
    Ok(out)
}

/// Column means of `A_T` over valid query rows, before any renormalisation,
/// for the valid key positions.
pub fn received_attention(a_t: &Matrix, mask: &[bool]) -> Vec<f64> {
    let valid: Vec<usize> = (0..mask.len()).filter(|&j| mask[j]).collect();
    let means = a_t.column_means_over(valid.iter().copied());
    valid.iter().map(|&j| means[j]).collect()
}

/// Attention focus `T_v · Σ_j r_j²` of the received-attention profile `r`:
/// the attention-weighted mean of received attention relative to the uniform
/// level. Equals 1 for uniform attention and `T_v` when all attention lands
/// on a single time-point.
pub fn attention_focus(received: &[f64]) -> f64 {
    received.len() as f64 * received.iter().map(|r| r * r).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_rows_give_uniform_weights() {
        let mut a = Matrix::zeros(5, 5);
        for i in 0..5 {
            for j in 0..3 {
                a[(i, j)] = 1.0 / 3.0;
            }
        }
        let mask = [true, true, true, false, false];
        let w = average_temporal(&a, &mask, AveragingAxis::Received, RenormOrder::AfterAveraging).unwrap();
        for j in 0..3 {
            assert!((w[j] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(&w[3..], &[0.0, 0.0]);
        assert!((attention_focus(&received_attention(&a, &mask)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_rows() {
        let mut a = Matrix::zeros(4, 4);
        for i in 0..4 {
            a[(i, 2)] = 1.0;
        }
        let w = average_temporal(&a, &[true; 4], AveragingAxis::Received, RenormOrder::AfterAveraging).unwrap();
        assert_eq!(w, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(attention_focus(&received_attention(&a, &[true; 4])), 4.0);
    }

    #[test]
    fn random_matrix_matches_column_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut a = Matrix::zeros(4, 4);
        for i in 0..4 {
            let row: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let s: f64 = row.iter().sum();
            for j in 0..4 {
                a[(i, j)] = row[j] / s;
            }
        }
        // brute-force oracle: column sums / 4, then renormalise
        let mut oracle = [0.0; 4];
        for j in 0..4 {
            for i in 0..4 {
                oracle[j] += a[(i, j)];
            }
            oracle[j] /= 4.0;
        }
        let total: f64 = oracle.iter().sum();
        for order in [RenormOrder::AfterAveraging, RenormOrder::BeforeAveraging] {
            let w = average_temporal(&a, &[true; 4], AveragingAxis::Received, order).unwrap();
            for j in 0..4 {
                assert!((w[j] - oracle[j] / total).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn given_axis_on_stochastic_rows_is_uniform() {
        let a = Matrix::new(2, 2, vec![0.9, 0.1, 0.4, 0.6]).unwrap();
        let w = average_temporal(&a, &[true, true], AveragingAxis::Given, RenormOrder::AfterAveraging).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn no_valid_rows() {
        let r = average_temporal(&Matrix::zeros(2, 2), &[false, false], AveragingAxis::Received, RenormOrder::AfterAveraging);
        assert!(matches!(r, Err(Error::NoValidRows)));
    }
}
