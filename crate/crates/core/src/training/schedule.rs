/// Number of warmup updates: `ceil(warmup_ratio * total_steps)`, with
/// products within rounding noise of an integer taken as that integer.
pub fn warmup_steps(total_steps: usize, warmup_ratio: f64) -> usize {
    let x = warmup_ratio * total_steps as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Linear warmup from 0 to `peak` over the warmup updates, then linear decay
/// to 0 at `total_steps`. Update `k` (0-based) uses `lr_at(k, ..)`.
pub fn lr_at(step: usize, total_steps: usize, peak: f64, warmup_ratio: f64) -> f64 {
    let warmup = warmup_steps(total_steps, warmup_ratio);
    if step < warmup {
        peak * (step as f64 / warmup as f64)
    } else if step >= total_steps {
        0.0
    } else {
        peak * ((total_steps - step) as f64 / (total_steps - warmup) as f64)
    }
}
