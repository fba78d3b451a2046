use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Prior;
use crate::dist::poisson_binomial_slice;
use crate::error::{domain, Result};
use crate::mechanism::sharded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Integration,
}

/// Estimates of `c_l = E[α_l − α_{K−l}]` for `l = (K+1)/2..K`, up to a
/// common positive factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveCoeffs {
    #[serde(rename = "K")]
    pub k: usize,
    pub values: Vec<f64>,
    pub method: Method,
    #[serde(rename = "T")]
    pub t: u64,
    pub tau: Option<usize>,
    pub seed: u64,
}

impl ObjectiveCoeffs {
    /// Exact coefficients supplied by the caller.
    pub fn given(k: usize, values: Vec<f64>) -> Result<Self> {
        if k % 2 == 0 || values.len() != k / 2 + 1 {
            return domain(format!("K = {k} needs {} coefficients, got {}", k / 2 + 1, values.len()));
        }
        Ok(Self { k, values, method: Method::Integration, t: 0, tau: None, seed: 0 })
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|c| c.abs() <= 1e-15)
    }
}

fn check(k: usize, t: u64) -> Result<()> {
    if k == 0 || k % 2 == 0 {
        return domain(format!("K must be odd and positive, got {k}"));
    }
    if t == 0 {
        return domain("T must be at least 1");
    }
    Ok(())
}

fn mean_diffs(k: usize, t: u64, seed: u64, draw: impl Fn(&mut rand_chacha::ChaCha20Rng) -> f64 + Sync) -> Vec<f64> {
    // variables are l = (K+1)/2..K, which is also (K+1)/2 of them
    let h = k / 2 + 1;
    let sums = sharded(
        t,
        seed,
        || vec![0.0; h],
        |rng, acc, _| {
            let p: Vec<f64> = (0..k).map(|_| draw(rng)).collect();
            let pmf = poisson_binomial_slice(&p).expect("probabilities drawn from [0,1]");
            for (j, a) in acc.iter_mut().enumerate() {
                let l = h + j;
                *a += pmf.get(l) - pmf.get(k - l);
            }
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    );
    sums.into_iter().map(|s| s / t as f64).collect()
}

/// Averages `α_l − α_{K−l}` over `T` draws of `p_1..p_K` from the prior.
pub fn objective_coeffs_naive(k: usize, prior: &Prior, t: u64, seed: u64) -> Result<ObjectiveCoeffs> {
    check(k, t)?;
    let values = mean_diffs(k, t, seed, |rng| prior.sample(rng));
    Ok(ObjectiveCoeffs { k, values, method: Method::Naive, t, tau: None, seed })
}

/// Rectangle-rule estimate over the grid of `τ` points in the upper region of
/// the prior, by averaging `α_l − α_{K−l}` over `T` uniform draws from the
/// `K`-fold grid. The grid cell volume and count are a shared positive
/// factor and are left out.
pub fn objective_coeffs_integration(k: usize, prior: &Prior, t: u64, tau: usize, seed: u64) -> Result<ObjectiveCoeffs> {
    check(k, t)?;
    let grid = prior.upper_grid(tau)?;
    let values = mean_diffs(k, t, seed, |rng| grid[rng.gen_range(0..grid.len())]);
    Ok(ObjectiveCoeffs { k, values, method: Method::Integration, t, tau: Some(tau), seed })
}
