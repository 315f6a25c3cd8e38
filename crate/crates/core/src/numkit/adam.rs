use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Moment estimates and settings for bias-corrected Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::LengthMismatch {
            left: params.len(),
            right: grads.len(),
        });
    }
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::LengthMismatch {
            left: params.len(),
            right: state.m.len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![0.3, -1.2];
        let mut s = AdamState::new(2, 0.1);
        adam_step(&mut p, &[0.0, 0.0], &mut s).unwrap();
        assert_eq!(p, vec![0.3, -1.2]);
        assert_eq!(s.m, vec![0.0, 0.0]);
        assert_eq!(s.v, vec![0.0, 0.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn constant_gradient_update_tends_to_lr_times_sign() {
        // With a constant gradient g the bias-corrected moments are exactly
        // m̂ = g and v̂ = g², so every step moves by lr·g/(|g| + eps).
        let lr = 0.01;
        let mut p = vec![0.0, 0.0];
        let mut s = AdamState::new(2, lr);
        let g = [2.5, -0.4];
        let mut last = p.clone();
        for _ in 0..200 {
            adam_step(&mut p, &g, &mut s).unwrap();
            let du: Vec<f64> = p.iter().zip(&last).map(|(a, b)| a - b).collect();
            assert!((du[0] + lr).abs() < 1e-9);
            assert!((du[1] - lr).abs() < 1e-9);
            last = p.clone();
        }
    }

    #[test]
    fn length_mismatch() {
        let mut s = AdamState::new(2, 0.1);
        let r = adam_step(&mut [0.0, 0.0], &[1.0], &mut s);
        assert!(matches!(r, Err(Error::LengthMismatch { .. })));
        assert_eq!(s.step, 0);
    }
}
