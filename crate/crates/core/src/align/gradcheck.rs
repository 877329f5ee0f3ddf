//! Central finite-difference verification of analytic gradients.

use thiserror::Error;

use crate::util::DetRng;

#[derive(Debug, Error)]
pub enum GradCheckError {
    #[error("loss function failed during perturbation: {0}")]
    LossFailed(String),
    #[error("non-finite loss at base point")]
    NonFiniteLoss,
    #[error("no indices to check")]
    NoIndices,
}

/// Picks `count` distinct parameter indices deterministically.
pub fn pick_check_indices(param_count: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..param_count).collect();
    let mut rng = DetRng::new(seed);
    rng.shuffle(&mut order);
    order.truncate(count.min(param_count));
    order.sort_unstable();
    order
}

/// Compares `analytic` against central finite differences of `loss_fn` at
/// `params`, over the given indices. Returns the max relative error, with
/// the difference normalized by `max(|analytic|, |numeric|, 1)` so that
/// near-zero gradients compare absolutely.
pub fn grad_check<F>(
    mut loss_fn: F,
    params: &[f64],
    analytic: &[f64],
    indices: &[usize],
) -> Result<f64, GradCheckError>
where
    F: FnMut(&[f64]) -> Result<f64, String>,
{
    if indices.is_empty() {
        return Err(GradCheckError::NoIndices);
    }
    let base = loss_fn(params).map_err(GradCheckError::LossFailed)?;
    if !base.is_finite() {
        return Err(GradCheckError::NonFiniteLoss);
    }

    let mut work = params.to_vec();
    let mut max_rel = 0.0f64;
    for &i in indices {
        let step = 1e-5 * params[i].abs().max(1.0);
        let original = work[i];
        work[i] = original + step;
        let plus = loss_fn(&work).map_err(GradCheckError::LossFailed)?;
        work[i] = original - step;
        let minus = loss_fn(&work).map_err(GradCheckError::LossFailed)?;
        work[i] = original;
        let numeric = (plus - minus) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs()).max(1.0);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}
