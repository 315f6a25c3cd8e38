//! Forward and hand-derived backward pass of the attention classifiers.
//!
//! Temporal path: the `n` valid time-points are tokens of width `V`.
//! `S = X W_q W_kᵀ Xᵀ / √d_k` is evaluated as `(X M) Xᵀ` with the `V x V`
//! matrix `M = W_q W_kᵀ / √d_k`. Mean-pooling the context over query rows
//! gives `c_t = W_vᵀ Xᵀ r`, where `r_j` is the attention received by key `j`
//! averaged over queries, so the full `A V` product is never materialised.
//!
//! Feature path: each feature's valid profile is summarised into `d_f`
//! descriptors, and the `V` descriptor rows go through an ordinary scaled
//! dot-product block.

use super::params::{names::*, GradBuffer, ModelParams, Variant};
use super::{AttentionBundle, PreparedInput};
use crate::error::{Error, Result};
use crate::numkit::{
    bce_grad, bce_loss, dot, masked_softmax_rows, scaled_dot_attention,
    scaled_dot_attention_backward, sigmoid, Attention, Matrix,
};

pub(crate) struct TemporalState {
    /// `n x n` attention over valid time-points.
    pub a: Matrix,
    /// `Xᵀ r`
    pub xbar: Vec<f64>,
    pub pooled: Vec<f64>,
}

pub(crate) struct FeatureState {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    pub att: Attention,
    pub pooled: Vec<f64>,
}

pub(crate) struct ForwardState {
    pub temporal: TemporalState,
    pub feature: Option<FeatureState>,
    pub p: f64,
}

fn temporal_forward(params: &ModelParams, tokens: &Matrix) -> Result<TemporalState> {
    let wq = params.matrix(T_Q);
    let wk = params.matrix(T_K);
    let wv = params.matrix(T_V);
    let mut m = wq.matmul_t(&wk)?;
    m.scale(1.0 / (params.d_k as f64).sqrt());
    let logits = tokens.matmul(&m)?.matmul_t(tokens)?;
    let n = tokens.rows();
    let a = masked_softmax_rows(&logits, &vec![true; n])?;
    let received = a.column_means_over(0..n);
    let xbar = tokens
        .t_matmul(&Matrix::new(n, 1, received.clone())?)?
        .into_vec();
    let pooled = Matrix::new(1, xbar.len(), xbar.clone())?.matmul(&wv)?.into_vec();
    Ok(TemporalState {
        a,
        xbar,
        pooled,
    })
}

fn feature_forward(params: &ModelParams, descriptors: &Matrix) -> Result<FeatureState> {
    let q = descriptors.matmul(&params.matrix(F_Q))?;
    let k = descriptors.matmul(&params.matrix(F_K))?;
    let v = descriptors.matmul(&params.matrix(F_V))?;
    let n = descriptors.rows();
    let att = scaled_dot_attention(&q, &k, &v, &vec![true; n], params.d_f)?;
    let pooled = att.context.column_means_over(0..n);
    Ok(FeatureState {
        q,
        k,
        v,
        att,
        pooled,
    })
}

pub(crate) fn forward_state(params: &ModelParams, input: &PreparedInput) -> Result<ForwardState> {
    debug_assert!(params.variant.has_temporal_attention());
    let temporal = temporal_forward(params, &input.tokens)?;
    let feature = match params.variant {
        Variant::Dual => Some(feature_forward(params, &input.descriptors)?),
        _ => None,
    };
    let w = params.slice(HEAD_W);
    let b = params.slice(HEAD_B)[0];
    let mut logit = b + dot(&w[..params.d_k], &temporal.pooled);
    if let Some(f) = &feature {
        logit += dot(&w[params.d_k..], &f.pooled);
    }
    Ok(ForwardState {
        temporal,
        feature,
        p: sigmoid(logit),
    })
}

pub(crate) fn bundle(state: &ForwardState, input: &PreparedInput, n_features: usize) -> AttentionBundle {
    let n = input.valid.len();
    let t = input.t_pad;
    let mut a_t = Matrix::zeros(t, t);
    let mut is_valid = vec![false; t];
    input.valid.iter().for_each(|&j| is_valid[j] = true);
    for row in 0..t {
        if !is_valid[row] {
            // zero tokens produce zero logits: uniform over valid keys
            for &j in &input.valid {
                a_t[(row, j)] = 1.0 / n as f64;
            }
        }
    }
    for (qi, &row) in input.valid.iter().enumerate() {
        for (ki, &col) in input.valid.iter().enumerate() {
            a_t[(row, col)] = state.temporal.a[(qi, ki)];
        }
    }
    let a_f = match &state.feature {
        Some(f) => f.att.weights.clone(),
        None => Matrix::new(
            n_features,
            n_features,
            vec![1.0 / n_features as f64; n_features * n_features],
        )
        .expect("square"),
    };
    AttentionBundle {
        a_t,
        a_f,
        t_valid: n,
    }
}

pub(crate) fn loss_and_grads(
    params: &ModelParams,
    input: &PreparedInput,
    y: u8,
    weight: f64,
) -> Result<(f64, Vec<f64>)> {
    let st = forward_state(params, input)?;
    let loss = weight * bce_loss(st.p, y);
    let g_logit = weight * bce_grad(st.p, y) * st.p * (1.0 - st.p);

    let d_k = params.d_k;
    let w = params.slice(HEAD_W);
    let mut grads = GradBuffer::for_params(params);

    let mut g_head = st.temporal.pooled.iter().map(|c| g_logit * c).collect::<Vec<_>>();
    if let Some(f) = &st.feature {
        g_head.extend(f.pooled.iter().map(|c| g_logit * c));
    }
    grads.set(HEAD_W, &g_head);
    grads.set(HEAD_B, &[g_logit]);

    // temporal path
    let tokens = &input.tokens;
    let n = tokens.rows();
    let v = tokens.cols();
    let g_pooled: Vec<f64> = w[..d_k].iter().map(|wi| g_logit * wi).collect();
    let tm = &st.temporal;
    let mut g_wv = vec![0.0; v * d_k];
    for (f, &xb) in tm.xbar.iter().enumerate() {
        for (o, &g) in g_wv[f * d_k..(f + 1) * d_k].iter_mut().zip(&g_pooled) {
            *o = xb * g;
        }
    }
    grads.set(T_V, &g_wv);
    let wv = params.matrix(T_V);
    let g_xbar: Vec<f64> = (0..v).map(|f| dot(wv.row(f), &g_pooled)).collect();
    // r_j = (1/n) Σ_i A_ij, so dL/dA_ij = (X_j · g_xbar) / n for every row i
    let g_a_col: Vec<f64> = (0..n).map(|j| dot(tokens.row(j), &g_xbar) / n as f64).collect();
    let mut g_logits = Matrix::zeros(n, n);
    for i in 0..n {
        let a_row = tm.a.row(i);
        let inner = dot(a_row, &g_a_col);
        for ((o, &a), &g) in g_logits.row_mut(i).iter_mut().zip(a_row).zip(&g_a_col) {
            *o = a * (g - inner);
        }
    }
    let g_m = tokens.t_matmul(&g_logits.matmul(tokens)?)?;
    let scale = 1.0 / (d_k as f64).sqrt();
    let mut g_wq = g_m.matmul(&params.matrix(T_K))?;
    g_wq.scale(scale);
    let mut g_wk = g_m.t_matmul(&params.matrix(T_Q))?;
    g_wk.scale(scale);
    grads.set(T_Q, g_wq.as_slice());
    grads.set(T_K, g_wk.as_slice());

    // feature path
    if let Some(fs) = &st.feature {
        let n_f = input.descriptors.rows();
        let g_pooled: Vec<f64> = w[d_k..].iter().map(|wi| g_logit * wi / n_f as f64).collect();
        let mut g_ctx = Matrix::zeros(n_f, params.d_f);
        for i in 0..n_f {
            g_ctx.row_mut(i).copy_from_slice(&g_pooled);
        }
        let g = scaled_dot_attention_backward(&fs.q, &fs.k, &fs.v, &fs.att.weights, params.d_f, &g_ctx)?;
        let d = &input.descriptors;
        grads.set(F_Q, d.t_matmul(&g.q)?.as_slice());
        grads.set(F_K, d.t_matmul(&g.k)?.as_slice());
        grads.set(F_V, d.t_matmul(&g.v)?.as_slice());
    }

    if !loss.is_finite() || grads.values.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss);
    }
    Ok((loss, grads.values))
}
