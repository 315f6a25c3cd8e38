use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    #[default]
    Pearson,
    Spearman,
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Ranks starting at 1, ties share their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn correlate(a: &[f64], b: &[f64], method: CorrelationMethod) -> f64 {
    match method {
        CorrelationMethod::Pearson => pearson(a, b),
        CorrelationMethod::Spearman => pearson(&ranks(a), &ranks(b)),
    }
}

/// Correlation between the averaged temporal attention (`weights`, one per
/// entry of `valid`) and each feature's values at the same time-points.
pub fn attention_feature_correlation(
    weights: &[f64],
    x: &Matrix,
    valid: &[usize],
    method: CorrelationMethod,
) -> Result<Vec<f64>> {
    if weights.len() != valid.len() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: valid.len(),
        });
    }
    if valid.len() < 3 {
        return Err(Error::TooFewPoints(valid.len()));
    }
    Ok((0..x.rows())
        .map(|f| {
            let series: Vec<f64> = valid.iter().map(|&t| x[(f, t)]).collect();
            correlate(weights, &series, method)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_cases() {
        let w = [0.1, 0.4, 0.2, 0.3];
        let x = Matrix::from_rows(&[
            vec![1.0, 4.0, 2.0, 3.0],
            vec![-0.1, -0.4, -0.2, -0.3],
            vec![0.5, 0.5, 0.5, 0.5],
        ])
        .unwrap();
        let r = attention_feature_correlation(&w, &x, &[0, 1, 2, 3], CorrelationMethod::Pearson).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!((r[1] + 1.0).abs() < 1e-12);
        assert_eq!(r[2], 0.0);
    }

    #[test]
    fn too_few_points() {
        let x = Matrix::zeros(1, 2);
        assert!(matches!(
            attention_feature_correlation(&[0.5, 0.5], &x, &[0, 1], CorrelationMethod::Pearson),
            Err(Error::TooFewPoints(2))
        ));
    }

    #[test]
    fn spearman_uses_average_ranks() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let r = correlate(&[1.0, 2.0, 3.0, 4.0], &[1.0, 8.0, 27.0, 64.0], CorrelationMethod::Spearman);
        assert!((r - 1.0).abs() < 1e-12);
    }
}
