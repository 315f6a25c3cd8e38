use rand::{seq::index, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Central-difference gradient check on `n_probe` randomly chosen coordinates.
///
/// Returns the largest `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`
/// over the probes.
pub fn grad_check<F>(mut f: F, params: &[f64], eps: f64, n_probe: usize, seed: u64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step {eps} outside [1e-7, 1e-3]"
        )));
    }
    let (loss, grads) = f(params)?;
    if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss);
    }
    if grads.len() != params.len() {
        return Err(Error::LengthMismatch {
            left: params.len(),
            right: grads.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<usize> = if n_probe >= params.len() {
        (0..params.len()).collect()
    } else {
        let mut idx = index::sample(&mut rng, params.len(), n_probe).into_vec();
        idx.sort_unstable();
        idx
    };

    let mut theta = params.to_vec();
    let mut worst = 0.0f64;
    for i in probes {
        let orig = theta[i];
        theta[i] = orig + eps;
        let (plus, _) = f(&theta)?;
        theta[i] = orig - eps;
        let (minus, _) = f(&theta)?;
        theta[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let analytic = grads[i];
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
