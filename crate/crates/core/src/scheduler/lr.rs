//! Cosine learning-rate schedule with linear warmup.

/// Learning rate at `step`: linear ramp from 0 to `peak` over
/// `warmup_steps`, then cosine decay to `final_fraction * peak` at
/// `total_steps`. Continuous at the warmup boundary, non-increasing after
/// it, and exact at both endpoints.
///
/// Requires `0 <= step <= total_steps` and `warmup_steps < total_steps`.
pub fn cosine_lr(step: u64, total_steps: u64, warmup_steps: u64, peak: f64, final_fraction: f64) -> f64 {
    debug_assert!(step <= total_steps);
    debug_assert!(warmup_steps < total_steps);

    if step < warmup_steps {
        return peak * step as f64 / warmup_steps as f64;
    }
    let min_lr = final_fraction * peak;
    if step == total_steps {
        return min_lr;
    }
    let progress = (step - warmup_steps) as f64 / (total_steps - warmup_steps) as f64;
    min_lr + 0.5 * (peak - min_lr) * (1.0 + (std::f64::consts::PI * progress).cos())
}
