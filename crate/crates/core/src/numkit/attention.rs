use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Row-wise softmax restricted to the columns where `mask` is true.
///
/// Masked columns are skipped rather than pushed through `exp`, so they come
/// out as exact zeros. Each row is shifted by its unmasked maximum first.
pub fn masked_softmax_rows(logits: &Matrix, mask: &[bool]) -> Result<Matrix> {
    if mask.len() != logits.cols() {
        return Err(Error::ShapeMismatch(format!(
            "mask length {} for {} columns",
            mask.len(),
            logits.cols()
        )));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMaskedRow);
    }
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        let row = logits.row(i);
        let max = row
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&x, _)| x)
            .fold(f64::NEG_INFINITY, f64::max);
        let dst = out.row_mut(i);
        let mut total = 0.0;
        for ((d, &x), &m) in dst.iter_mut().zip(row).zip(mask) {
            if m {
                *d = (x - max).exp();
                total += *d;
            }
        }
        dst.iter_mut().for_each(|d| *d /= total);
    }
    Ok(out)
}

/// Vector-Jacobian product of [`masked_softmax_rows`]: maps `dL/dP` to `dL/dlogits`.
pub fn masked_softmax_backward(probs: &Matrix, grad_probs: &Matrix) -> Result<Matrix> {
    if probs.shape() != grad_probs.shape() {
        return Err(Error::ShapeMismatch("softmax backward".into()));
    }
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for i in 0..probs.rows() {
        let p = probs.row(i);
        let g = grad_probs.row(i);
        let inner: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        for ((o, &pj), &gj) in out.row_mut(i).iter_mut().zip(p).zip(g) {
            *o = pj * (gj - inner);
        }
    }
    Ok(out)
}

/// Output of [`scaled_dot_attention`].
#[derive(Debug, Clone)]
pub struct Attention {
    pub context: Matrix,
    pub weights: Matrix,
}

/// `A = softmax(Q Kᵀ / √d_k)` over unmasked keys, `context = A V`.
pub fn scaled_dot_attention(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    key_mask: &[bool],
    d_k: usize,
) -> Result<Attention> {
    if q.cols() != d_k || k.cols() != d_k {
        return Err(Error::ShapeMismatch(format!(
            "query/key width {}/{} but d_k = {d_k}",
            q.cols(),
            k.cols()
        )));
    }
    if v.rows() != k.rows() || key_mask.len() != k.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} keys, {} values, mask of {}",
            k.rows(),
            v.rows(),
            key_mask.len()
        )));
    }
    let mut logits = q.matmul_t(k)?;
    logits.scale(1.0 / (d_k as f64).sqrt());
    let weights = masked_softmax_rows(&logits, key_mask)?;
    let context = weights.matmul(v)?;
    Ok(Attention { context, weights })
}

#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
}

/// Backward pass of [`scaled_dot_attention`] given `dL/dcontext`.
pub fn scaled_dot_attention_backward(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    weights: &Matrix,
    d_k: usize,
    grad_context: &Matrix,
) -> Result<AttentionGrads> {
    let grad_weights = grad_context.matmul_t(v)?;
    let grad_v = weights.t_matmul(grad_context)?;
    let mut grad_logits = masked_softmax_backward(weights, &grad_weights)?;
    grad_logits.scale(1.0 / (d_k as f64).sqrt());
    Ok(AttentionGrads {
        q: grad_logits.matmul(k)?,
        k: grad_logits.t_matmul(q)?,
        v: grad_v,
    })
}
