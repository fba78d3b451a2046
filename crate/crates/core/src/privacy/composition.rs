use crate::error::{domain, Result};

/// Basic composition: `k` runs of an `(ε, δ)`-DP mechanism are `(kε, kδ)`-DP.
pub fn simple_composition(k: f64, eps: f64, delta: f64) -> Result<(f64, f64)> {
    if !(k >= 1.0) {
        return domain(format!("k must be at least 1, got {k}"));
    }
    Ok((k * eps, k * delta))
}

/// Advanced composition of `k` adaptive runs with slack `δ'`, taking the
/// best of the three available bounds. `δ' = 0` leaves only `kε`.
pub fn general_composition(k: u32, eps: f64, delta: f64, delta_prime: f64) -> Result<(f64, f64)> {
    if k == 0 {
        return domain("k must be at least 1");
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return domain(format!("eps must be non-negative, got {eps}"));
    }
    if !(0.0..=1.0).contains(&delta) || !(0.0..=1.0).contains(&delta_prime) {
        return domain(format!("delta {delta} and delta' {delta_prime} must lie in [0,1]"));
    }
    let kf = f64::from(k);
    let delta_total = 1.0 - (1.0 - delta).powi(k as i32) * (1.0 - delta_prime);
    let mut best = kf * eps;
    if delta_prime > 0.0 {
        let drift = eps.exp_m1() * eps * kf / (eps.exp() + 1.0);
        let a = drift + eps * (2.0 * kf * (std::f64::consts::E + (kf * eps * eps).sqrt() / delta_prime).ln()).sqrt();
        let b = drift + eps * (2.0 * kf * (1.0 / delta_prime).ln()).sqrt();
        best = best.min(a).min(b);
    }
    Ok((best, delta_total))
}
