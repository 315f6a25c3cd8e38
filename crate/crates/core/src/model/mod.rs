//! Binary cluster-membership classifiers: the dual-attention model, its
//! temporal-only ablation, and a recurrent baseline.

mod attention_net;
mod checkpoint;
mod params;
mod recurrent;
mod train;

pub use checkpoint::{Checkpoint, NamedBlock, CHECKPOINT_VERSION};
pub use params::{layout, Block, ClassWeighting, Hyperparams, ModelParams, Variant};
pub use train::{train_model, TrainedModel};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Attention weights of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBundle {
    /// `T x T`, row-stochastic, zero on padded keys.
    pub a_t: Matrix,
    /// `V x V`, row-stochastic.
    pub a_f: Matrix,
    pub t_valid: usize,
}

/// Number of per-feature descriptors before padding/truncation to `d_f`.
pub const N_DESCRIPTORS: usize = 6;

/// One individual's input gathered to its valid time-points.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    /// Padded positions that are valid, in time order.
    pub valid: Vec<usize>,
    pub t_pad: usize,
    /// `n x V`, one row per valid time-point.
    pub tokens: Matrix,
    /// `V x d_f` feature descriptors.
    pub descriptors: Matrix,
}

/// Gathers the valid columns of `x` (`V x T`) and summarises each feature.
pub fn prepare(x: &Matrix, mask: &[bool], d_f: usize) -> Result<PreparedInput> {
    if mask.len() != x.cols() {
        return Err(Error::ShapeMismatch(format!(
            "mask of length {} for {} time-points",
            mask.len(),
            x.cols()
        )));
    }
    let valid: Vec<usize> = (0..mask.len()).filter(|&t| mask[t]).collect();
    if valid.len() < 2 {
        return Err(Error::MaskTooSparse(valid.len()));
    }
    let v = x.rows();
    let mut tokens = Matrix::zeros(valid.len(), v);
    for (i, &t) in valid.iter().enumerate() {
        for f in 0..v {
            tokens[(i, f)] = x[(f, t)];
        }
    }
    let mut descriptors = Matrix::zeros(v, d_f);
    for f in 0..v {
        let profile: Vec<f64> = valid.iter().map(|&t| x[(f, t)]).collect();
        let d = describe(&profile);
        let keep = d_f.min(N_DESCRIPTORS);
        descriptors.row_mut(f)[..keep].copy_from_slice(&d[..keep]);
    }
    Ok(PreparedInput {
        valid,
        t_pad: x.cols(),
        tokens,
        descriptors,
    })
}

/// mean, sd, lag-1 autocorrelation, trend slope over rescaled time in [0, 1], min, max.
pub fn describe(profile: &[f64]) -> [f64; N_DESCRIPTORS] {
    let n = profile.len() as f64;
    let mean = profile.iter().sum::<f64>() / n;
    let ss: f64 = profile.iter().map(|x| (x - mean).powi(2)).sum();
    let sd = (ss / n).sqrt();
    let autocorr = if ss > 0.0 {
        profile.windows(2).map(|w| (w[1] - mean) * (w[0] - mean)).sum::<f64>() / ss
    } else {
        0.0
    };
    let span = (profile.len() - 1).max(1) as f64;
    let u_mean = 0.5 * (profile.len() - 1) as f64 / span;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, &x) in profile.iter().enumerate() {
        let du = t as f64 / span - u_mean;
        sxy += du * (x - mean);
        sxx += du * du;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let min = profile.iter().copied().fold(f64::INFINITY, f64::min);
    let max = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [mean, sd, autocorr, slope, min, max]
}

fn check_input(params: &ModelParams, x: &Matrix) -> Result<()> {
    if x.rows() != params.n_features {
        return Err(Error::ShapeMismatch(format!(
            "input has {} features, model expects {}",
            x.rows(),
            params.n_features
        )));
    }
    Ok(())
}

fn uniform_bundle(input: &PreparedInput, v: usize) -> AttentionBundle {
    let n = input.valid.len();
    let mut a_t = Matrix::zeros(input.t_pad, input.t_pad);
    for row in 0..input.t_pad {
        for &j in &input.valid {
            a_t[(row, j)] = 1.0 / n as f64;
        }
    }
    AttentionBundle {
        a_t,
        a_f: Matrix::new(v, v, vec![1.0 / v as f64; v * v]).expect("square"),
        t_valid: n,
    }
}

/// Probability on an already prepared input. Cheaper than [`forward`] when
/// attention weights are not needed.
pub fn probability(params: &ModelParams, input: &PreparedInput) -> Result<f64> {
    match params.variant {
        Variant::RecurrentBaseline => Ok(recurrent::forward(params, &input.tokens)),
        _ => Ok(attention_net::forward_state(params, input)?.p),
    }
}

pub fn forward_prepared(params: &ModelParams, input: &PreparedInput) -> Result<(f64, AttentionBundle)> {
    match params.variant {
        Variant::RecurrentBaseline => Ok((
            recurrent::forward(params, &input.tokens),
            uniform_bundle(input, params.n_features),
        )),
        _ => {
            let st = attention_net::forward_state(params, input)?;
            Ok((st.p, attention_net::bundle(&st, input, params.n_features)))
        }
    }
}

/// Membership probability and attention weights for one individual
/// (`x` is `V x T`, `mask` marks valid time-points). The recurrent baseline
/// has no attention and reports uniform placeholders.
pub fn forward(params: &ModelParams, x: &Matrix, mask: &[bool]) -> Result<(f64, AttentionBundle)> {
    check_input(params, x)?;
    forward_prepared(params, &prepare(x, mask, params.d_f)?)
}

pub fn loss_and_grads_prepared(
    params: &ModelParams,
    input: &PreparedInput,
    y: u8,
    weight: f64,
) -> Result<(f64, Vec<f64>)> {
    match params.variant {
        Variant::RecurrentBaseline => recurrent::loss_and_grads(params, &input.tokens, y, weight),
        _ => attention_net::loss_and_grads(params, input, y, weight),
    }
}

/// `weight * bce(p, y)` and its exact gradient with respect to every parameter.
pub fn loss_and_grads(
    params: &ModelParams,
    x: &Matrix,
    mask: &[bool],
    y: u8,
    weight: f64,
) -> Result<(f64, Vec<f64>)> {
    check_input(params, x)?;
    loss_and_grads_prepared(params, &prepare(x, mask, params.d_f)?, y, weight)
}

/// GRU read-out probability.
pub fn recurrent_baseline_forward(params: &ModelParams, x: &Matrix, mask: &[bool]) -> Result<f64> {
    if params.variant != Variant::RecurrentBaseline {
        return Err(Error::InvalidConfig(format!(
            "recurrent forward on a {} model",
            params.variant
        )));
    }
    check_input(params, x)?;
    let input = prepare(x, mask, params.d_f)?;
    Ok(recurrent::forward(params, &input.tokens))
}

/// Decision rule shared by every variant; a tie at exactly 0.5 is positive.
pub fn decide(p: f64) -> u8 {
    u8::from(p >= 0.5)
}

pub fn predict(model: &TrainedModel, x: &Matrix, mask: &[bool]) -> Result<(u8, f64, AttentionBundle)> {
    let (p, bundle) = forward(&model.params, x, mask)?;
    Ok((decide(p), p, bundle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(v: usize, t: usize, valid: usize, seed: u64) -> (Matrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Matrix::zeros(v, t);
        for f in 0..v {
            for j in 0..valid {
                x[(f, j)] = rng.random::<f64>();
            }
        }
        (x, (0..t).map(|j| j < valid).collect())
    }

    fn random_params(variant: Variant, v: usize, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelParams::random(variant, v, 4, 8, 0.5, &mut rng)
    }

    #[test]
    fn zero_init_is_uniform() {
        let (x, mask) = random_input(3, 6, 4, 1);
        let mut p = ModelParams::zeros(Variant::Dual, 3, 4, 8);
        let b = p.find("head.b").unwrap().offset;
        p.values[b] = 0.3;
        let (prob, bundle) = forward(&p, &x, &mask).unwrap();
        assert!((prob - crate::numkit::sigmoid(0.3)).abs() < 1e-15);
        for i in 0..6 {
            for j in 0..6 {
                let want = if j < 4 { 0.25 } else { 0.0 };
                assert!((bundle.a_t[(i, j)] - want).abs() < 1e-15);
            }
        }
        assert!(bundle.a_f.as_slice().iter().all(|&a| (a - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn temporal_only_has_placeholder_feature_attention() {
        let (x, mask) = random_input(3, 5, 5, 2);
        let p = random_params(Variant::TemporalOnly, 3, 3);
        let (_, bundle) = forward(&p, &x, &mask).unwrap();
        assert!(bundle.a_f.as_slice().iter().all(|&a| a == 1.0 / 3.0));
        assert_eq!(p.slice("head.w").len(), 4);
    }

    #[test]
    fn rows_are_stochastic() {
        let (x, mask) = random_input(3, 4, 4, 4);
        let p = random_params(Variant::Dual, 3, 5);
        let (_, bundle) = forward(&p, &x, &mask).unwrap();
        for s in bundle.a_t.row_sums().into_iter().chain(bundle.a_f.row_sums()) {
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (variant, seed) in [
            (Variant::Dual, 10),
            (Variant::TemporalOnly, 11),
            (Variant::RecurrentBaseline, 12),
        ] {
            let (x, mask) = random_input(3, 9, 7, seed);
            let p = random_params(variant, 3, seed + 100);
            for y in [0u8, 1] {
                let f = |theta: &[f64]| {
                    let q = ModelParams { values: theta.to_vec(), ..p.clone() };
                    loss_and_grads(&q, &x, &mask, y, 1.3)
                };
                let err = grad_check(f, &p.values, 1e-4, p.len(), 7).unwrap();
                assert!(err < 1e-4, "{variant} y={y}: {err}");
            }
        }
    }

    #[test]
    fn weight_zero_gives_zero_gradient() {
        let (x, mask) = random_input(3, 6, 6, 20);
        let p = random_params(Variant::Dual, 3, 21);
        let (loss, g) = loss_and_grads(&p, &x, &mask, 1, 0.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weight_is_linear() {
        let (x, mask) = random_input(3, 6, 5, 22);
        let p = random_params(Variant::Dual, 3, 23);
        let (_, g1) = loss_and_grads(&p, &x, &mask, 0, 1.0).unwrap();
        let (_, g2) = loss_and_grads(&p, &x, &mask, 0, 2.0).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn recurrent_edge_cases() {
        let (x, mask) = random_input(3, 5, 5, 30);
        let zero = ModelParams::zeros(Variant::RecurrentBaseline, 3, 4, 8);
        assert_eq!(recurrent_baseline_forward(&zero, &x, &mask).unwrap(), 0.5);
        // a single valid step is rejected by the shared mask precondition
        let one: Vec<bool> = (0..5).map(|t| t == 0).collect();
        assert!(matches!(
            recurrent_baseline_forward(&zero, &x, &one),
            Err(Error::MaskTooSparse(1))
        ));
    }

    #[test]
    fn recurrent_single_update_step() {
        // T = 1 in the raw recurrence: h1 = z ⊙ tanh(x W_h + b_h)
        let p = random_params(Variant::RecurrentBaseline, 3, 31);
        let tokens = Matrix::new(1, 3, vec![0.2, 0.7, 0.1]).unwrap();
        let got = recurrent::forward(&p, &tokens);
        let h = p.d_k;
        let col = |name: &str, j: usize| -> f64 {
            let m = p.matrix(name);
            (0..3).map(|f| tokens[(0, f)] * m[(f, j)]).sum::<f64>()
        };
        let mut logit = p.slice("head.b")[0];
        for j in 0..h {
            let z = crate::numkit::sigmoid(col("gru.w_z", j) + p.slice("gru.b_z")[j]);
            let c = (col("gru.w_h", j) + p.slice("gru.b_h")[j]).tanh();
            logit += p.slice("head.w")[j] * z * c;
        }
        assert!((got - crate::numkit::sigmoid(logit)).abs() < 1e-14);
    }

    #[test]
    fn padding_does_not_change_probability() {
        let (x, mask) = random_input(3, 7, 7, 40);
        let (x_pad, mask_pad) = {
            let mut m = Matrix::zeros(3, 12);
            for f in 0..3 {
                m.row_mut(f)[..7].copy_from_slice(x.row(f));
            }
            (m, (0..12).map(|t| t < 7).collect::<Vec<_>>())
        };
        for variant in Variant::ALL {
            let p = random_params(variant, 3, 41);
            let a = forward(&p, &x, &mask).unwrap().0;
            let b = forward(&p, &x_pad, &mask_pad).unwrap().0;
            assert!((a - b).abs() < 1e-12, "{variant}");
        }
    }

    #[test]
    fn decision_rule() {
        assert_eq!(decide(0.7), 1);
        assert_eq!(decide(0.5), 1);
        assert_eq!(decide(0.49999), 0);
    }

    #[test]
    fn too_sparse_and_mismatched_inputs() {
        let p = random_params(Variant::Dual, 3, 50);
        let (x, _) = random_input(3, 4, 4, 51);
        assert!(matches!(
            forward(&p, &x, &[true, false, false, false]),
            Err(Error::MaskTooSparse(1))
        ));
        assert!(matches!(forward(&p, &x, &[true; 3]), Err(Error::ShapeMismatch(_))));
        let (x2, m2) = random_input(2, 4, 4, 52);
        assert!(matches!(forward(&p, &x2, &m2), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn descriptors_of_a_ramp() {
        let d = describe(&[0.0, 0.5, 1.0]);
        assert_eq!(d[0], 0.5);
        assert!((d[1] - (1.0f64 / 6.0).sqrt()).abs() < 1e-15);
        // lag-1: ((0.5)(0) + (0)(-0.5)) / 0.5 = 0
        assert_eq!(d[2], 0.0);
        assert!((d[3] - 1.0).abs() < 1e-15);
        assert_eq!((d[4], d[5]), (0.0, 1.0));
        assert_eq!(describe(&[0.3, 0.3])[2], 0.0);
    }
}
