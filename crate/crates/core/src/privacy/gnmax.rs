use serde::{Deserialize, Serialize};

use crate::error::{domain, DarrmError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnmaxParams {
    pub lambda: f64,
    pub sigma: f64,
    pub lambda_min: f64,
}

/// `σ²` making GNMax `(ε, δ)`-DP through its `(λ, λ/σ²)` Rényi bound, or
/// `None` when `λ` is too small for the conversion to work.
pub fn sigma_sq_at(lambda: f64, eps: f64, delta: f64) -> Option<f64> {
    let den = eps - (1.0 / delta).ln() / (lambda - 1.0);
    (lambda > 1.0 && den > 0.0).then(|| lambda / den)
}

/// Grid search for the smallest GNMax noise meeting `(ε, δ)`, over
/// `λ = λ_min + j·step ≤ λ_max` with `λ_min = log(1/δ)/ε + 1`.
pub fn gnmax_sigma(eps: f64, delta: f64, lambda_max: f64, lambda_step: f64) -> Result<GnmaxParams> {
    if !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) || !(lambda_step > 0.0) {
        return domain(format!("bad GNMax target eps={eps}, delta={delta}, step={lambda_step}"));
    }
    let lambda_min = (1.0 / delta).ln() / eps + 1.0;
    let mut best: Option<(f64, f64)> = None;
    let mut j = 0u64;
    loop {
        let lambda = lambda_min + j as f64 * lambda_step;
        if lambda > lambda_max {
            break;
        }
        if let Some(s2) = sigma_sq_at(lambda, eps, delta) {
            if best.map_or(true, |(_, b)| s2 < b) {
                best = Some((lambda, s2));
            }
        }
        j += 1;
    }
    let (lambda, s2) = best.ok_or_else(|| DarrmError::Infeasible("no admissible lambda on the grid".into()))?;
    Ok(GnmaxParams { lambda, sigma: s2.sqrt(), lambda_min })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataDependentBound {
    pub bound: f64,
    /// Whether the minimum came from the data-dependent branch rather than
    /// the Gaussian `λ/σ²`.
    pub data_dependent: bool,
    pub class: usize,
}

/// Data-dependent Rényi bound of GNMax at order `λ` for the given vote
/// histogram, taking the best candidate over classes.
pub fn data_dependent_bound(sigma: f64, lambda: f64, votes: &[f64]) -> Result<DataDependentBound> {
    if !(sigma > 0.0) || !(lambda > 1.0) || votes.iter().any(|v| !(*v >= 0.0)) || votes.is_empty() {
        return domain(format!("bad arguments sigma={sigma}, lambda={lambda}, votes={votes:?}"));
    }
    let s2 = sigma * sigma;
    let gaussian = lambda / s2;
    let mut best = DataDependentBound { bound: f64::INFINITY, data_dependent: false, class: 0 };
    for (star, n_star) in votes.iter().enumerate() {
        let q: f64 = 0.5
            * votes
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != star)
                .map(|(_, n)| libm::erfc((n_star - n) / (2.0 * sigma)))
                .sum::<f64>();
        let mut cand = (gaussian, false);
        if q > 0.0 && q < 1.0 {
            let mu2 = sigma * (1.0 / q).ln().sqrt();
            let mu1 = mu2 + 1.0;
            let (e1, e2) = (mu1 / s2, mu2 / s2);
            let q_ub = ((mu2 - 1.0) * e2).exp() / ((mu1 / (mu1 - 1.0)) * (mu2 / (mu2 - 1.0))).powf(mu2);
            if mu1 >= lambda && mu2 > 1.0 && q <= q_ub {
                let a = (1.0 - q) / (1.0 - (q * e2.exp()).powf((mu2 - 1.0) / mu2));
                let b = e1.exp() / q.powf(1.0 / (mu1 - 1.0));
                let dd = ((1.0 - q) * a.powf(lambda - 1.0) + q * b.powf(lambda - 1.0)).ln() / (lambda - 1.0);
                if dd.is_finite() {
                    cand = (dd, true);
                }
            }
        }
        if cand.0 < best.bound {
            best = DataDependentBound { bound: cand.0, data_dependent: cand.1, class: star };
        }
    }
    Ok(best)
}
