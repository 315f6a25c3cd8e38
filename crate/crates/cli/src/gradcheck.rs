//! Finite-difference check of every model variant on random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use clusterlens_core::model::{loss_and_grads, ModelParams};
use clusterlens_core::numkit::grad_check;
use clusterlens_core::{Matrix, Result, Variant};

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub instances: usize,
    pub n_features: usize,
    /// Padded lengths to cycle through.
    pub lengths: Vec<usize>,
    pub d_k: usize,
    pub d_f: usize,
    /// Finite-difference step; `None` uses [`default_step`].
    pub eps: Option<f64>,
    /// Half-width of the uniform parameter draw.
    pub param_scale: f64,
    pub seed: u64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            instances: 20,
            n_features: 12,
            lengths: vec![20, 50],
            d_k: 16,
            d_f: 8,
            eps: None,
            param_scale: 0.3,
            seed: 0,
        }
    }
}

/// Default finite-difference step per variant. Recurrent coordinates are
/// limited by truncation error, attention coordinates by rounding error.
pub fn default_step(variant: Variant) -> f64 {
    match variant {
        Variant::RecurrentBaseline => 1e-4,
        Variant::TemporalOnly | Variant::Dual => 1e-3,
    }
}

/// Relative error at or above the acceptance threshold.
#[derive(Debug, thiserror::Error)]
#[error("gradient check failed: max relative error {0:.3e}")]
pub struct GradientMismatch(pub f64);

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckResult {
    pub variant: Variant,
    pub instances: usize,
    pub eps: f64,
    pub max_rel_err: f64,
}

/// One random instance: values in `[0, 1)`, between half and all of the
/// time-points valid, a random label and a random sample weight.
fn instance(rng: &mut ChaCha8Rng, v: usize, t: usize) -> (Matrix, Vec<bool>, u8, f64) {
    let valid = rng.random_range(t.div_ceil(2).max(2)..=t);
    let mut x = Matrix::zeros(v, t);
    for f in 0..v {
        for j in 0..valid {
            x[(f, j)] = rng.random::<f64>();
        }
    }
    let mask = (0..t).map(|j| j < valid).collect();
    (x, mask, rng.random_range(0..=1u8), rng.random_range(0.5..2.0))
}

/// Checks every parameter coordinate of each instance.
pub fn run(variant: Variant, opts: &GradcheckOptions) -> Result<GradcheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (variant as u64).wrapping_mul(0x9e37_79b9));
    let eps = opts.eps.unwrap_or_else(|| default_step(variant));
    let mut worst = 0.0f64;
    for n in 0..opts.instances {
        let t = opts.lengths[n % opts.lengths.len()];
        let (x, mask, y, w) = instance(&mut rng, opts.n_features, t);
        let params = ModelParams::random(variant, opts.n_features, opts.d_k, opts.d_f, opts.param_scale, &mut rng);
        let f = |theta: &[f64]| {
            let p = ModelParams {
                values: theta.to_vec(),
                ..params.clone()
            };
            loss_and_grads(&p, &x, &mask, y, w)
        };
        let err = grad_check(f, &params.values, eps, params.len(), n as u64)?;
        worst = worst.max(err);
    }
    Ok(GradcheckResult {
        variant,
        instances: opts.instances,
        eps,
        max_rel_err: worst,
    })
}

pub fn run_all(opts: &GradcheckOptions) -> Result<Vec<GradcheckResult>> {
    Variant::ALL.iter().map(|&v| run(v, opts)).collect()
}
