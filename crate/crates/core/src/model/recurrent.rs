//! Single-layer GRU baseline: the final valid hidden state feeds a logistic head.

use super::params::{names::*, GradBuffer, ModelParams};
use crate::error::{Error, Result};
use crate::numkit::{bce_grad, bce_loss, dot, sigmoid, Matrix};

struct Step {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    cand: Vec<f64>,
}

struct Weights {
    w_z: Matrix,
    u_z: Matrix,
    w_r: Matrix,
    u_r: Matrix,
    w_h: Matrix,
    u_h: Matrix,
}

impl Weights {
    fn of(p: &ModelParams) -> Self {
        Self {
            w_z: p.matrix(G_WZ),
            u_z: p.matrix(G_UZ),
            w_r: p.matrix(G_WR),
            u_r: p.matrix(G_UR),
            w_h: p.matrix(G_WH),
            u_h: p.matrix(G_UH),
        }
    }
}

/// `out += rowvec · m`
fn add_vec_mat(out: &mut [f64], rowvec: &[f64], m: &Matrix) {
    for (i, &x) in rowvec.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(m.row(i)) {
            *o += x * w;
        }
    }
}

/// `m · colvec`
fn mat_vec(m: &Matrix, colvec: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|i| dot(m.row(i), colvec)).collect()
}

fn add_outer(acc: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (i, &x) in a.iter().enumerate() {
        for (o, &y) in acc[i * cols..(i + 1) * cols].iter_mut().zip(b) {
            *o += x * y;
        }
    }
}

fn run(params: &ModelParams, tokens: &Matrix) -> (Vec<Step>, Vec<f64>) {
    let w = Weights::of(params);
    let (b_z, b_r, b_h) = (params.slice(G_BZ), params.slice(G_BR), params.slice(G_BH));
    let hidden = params.d_k;
    let mut h = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(tokens.rows());
    for t in 0..tokens.rows() {
        let x = tokens.row(t);
        let mut z = b_z.to_vec();
        add_vec_mat(&mut z, x, &w.w_z);
        add_vec_mat(&mut z, &h, &w.u_z);
        z.iter_mut().for_each(|a| *a = sigmoid(*a));
        let mut r = b_r.to_vec();
        add_vec_mat(&mut r, x, &w.w_r);
        add_vec_mat(&mut r, &h, &w.u_r);
        r.iter_mut().for_each(|a| *a = sigmoid(*a));
        let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
        let mut cand = b_h.to_vec();
        add_vec_mat(&mut cand, x, &w.w_h);
        add_vec_mat(&mut cand, &rh, &w.u_h);
        cand.iter_mut().for_each(|a| *a = a.tanh());
        let h_new = (0..hidden).map(|j| (1.0 - z[j]) * h[j] + z[j] * cand[j]).collect();
        steps.push(Step {
            h_prev: std::mem::replace(&mut h, h_new),
            z,
            r,
            cand,
        });
    }
    (steps, h)
}

pub(crate) fn forward(params: &ModelParams, tokens: &Matrix) -> f64 {
    let (_, h) = run(params, tokens);
    sigmoid(dot(params.slice(HEAD_W), &h) + params.slice(HEAD_B)[0])
}

pub(crate) fn loss_and_grads(
    params: &ModelParams,
    tokens: &Matrix,
    y: u8,
    weight: f64,
) -> Result<(f64, Vec<f64>)> {
    let (steps, h_last) = run(params, tokens);
    let head_w = params.slice(HEAD_W);
    let p = sigmoid(dot(head_w, &h_last) + params.slice(HEAD_B)[0]);
    let loss = weight * bce_loss(p, y);
    let g_logit = weight * bce_grad(p, y) * p * (1.0 - p);

    let hidden = params.d_k;
    let v = tokens.cols();
    let w = Weights::of(params);
    let mut g_wz = vec![0.0; v * hidden];
    let mut g_uz = vec![0.0; hidden * hidden];
    let mut g_bz = vec![0.0; hidden];
    let mut g_wr = g_wz.clone();
    let mut g_ur = g_uz.clone();
    let mut g_br = g_bz.clone();
    let mut g_wh = g_wz.clone();
    let mut g_uh = g_uz.clone();
    let mut g_bh = g_bz.clone();

    let mut g_h: Vec<f64> = head_w.iter().map(|w| g_logit * w).collect();
    for (t, s) in steps.iter().enumerate().rev() {
        let x = tokens.row(t);
        let mut g_prev: Vec<f64> = (0..hidden).map(|j| g_h[j] * (1.0 - s.z[j])).collect();
        let g_az: Vec<f64> = (0..hidden)
            .map(|j| g_h[j] * (s.cand[j] - s.h_prev[j]) * s.z[j] * (1.0 - s.z[j]))
            .collect();
        let g_ac: Vec<f64> = (0..hidden)
            .map(|j| g_h[j] * s.z[j] * (1.0 - s.cand[j] * s.cand[j]))
            .collect();

        let rh: Vec<f64> = s.r.iter().zip(&s.h_prev).map(|(a, b)| a * b).collect();
        add_outer(&mut g_wh, x, &g_ac);
        add_outer(&mut g_uh, &rh, &g_ac);
        g_bh.iter_mut().zip(&g_ac).for_each(|(o, g)| *o += g);
        let g_rh = mat_vec(&w.u_h, &g_ac);
        let g_ar: Vec<f64> = (0..hidden)
            .map(|j| g_rh[j] * s.h_prev[j] * s.r[j] * (1.0 - s.r[j]))
            .collect();
        for j in 0..hidden {
            g_prev[j] += g_rh[j] * s.r[j];
        }

        add_outer(&mut g_wz, x, &g_az);
        add_outer(&mut g_uz, &s.h_prev, &g_az);
        g_bz.iter_mut().zip(&g_az).for_each(|(o, g)| *o += g);
        add_outer(&mut g_wr, x, &g_ar);
        add_outer(&mut g_ur, &s.h_prev, &g_ar);
        g_br.iter_mut().zip(&g_ar).for_each(|(o, g)| *o += g);

        for (o, g) in g_prev.iter_mut().zip(mat_vec(&w.u_z, &g_az)) {
            *o += g;
        }
        for (o, g) in g_prev.iter_mut().zip(mat_vec(&w.u_r, &g_ar)) {
            *o += g;
        }
        g_h = g_prev;
    }

    let mut grads = GradBuffer::for_params(params);
    grads.set(G_WZ, &g_wz);
    grads.set(G_UZ, &g_uz);
    grads.set(G_BZ, &g_bz);
    grads.set(G_WR, &g_wr);
    grads.set(G_UR, &g_ur);
    grads.set(G_BR, &g_br);
    grads.set(G_WH, &g_wh);
    grads.set(G_UH, &g_uh);
    grads.set(G_BH, &g_bh);
    let g_head: Vec<f64> = h_last.iter().map(|h| g_logit * h).collect();
    grads.set(HEAD_W, &g_head);
    grads.set(HEAD_B, &[g_logit]);

    if !loss.is_finite() || grads.values.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss);
    }
    Ok((loss, grads.values))
}
