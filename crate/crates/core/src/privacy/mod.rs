//! Privacy accounting for DaRRM: the cost objective `f`, the finite corner
//! reduction, verifiers, and composition calculators.

mod composition;
mod corners;
mod gnmax;
mod verify;

use serde::{Deserialize, Serialize};

use crate::dist::Pmf;
use crate::error::{domain, Result};
use crate::gammas::NoiseFn;
use crate::scalar::{Real, Scalar};

pub use composition::{general_composition, simple_composition};
pub use corners::{
    constraint_multisets, corner_set, fold_multisets, multiset_count, ConstraintMultisets, CornerSet,
};
pub use gnmax::{data_dependent_bound, gnmax_sigma, sigma_sq_at, DataDependentBound, GnmaxParams};
pub use verify::{
    verify_general, verify_general_with, verify_iid_boundary, CornerAssignment, IidReport, VerifyOptions,
    VerifyReport, VERIFY_TOL,
};

/// Target `(mε, δ)` for the ensemble output given `K` mechanisms that are
/// each `(ε, Δ)`-DP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub eps: f64,
    #[serde(rename = "Delta")]
    pub delta_mech: f64,
    pub m: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(eps: f64, delta_mech: f64, m: f64, delta: f64) -> Result<Self> {
        let b = Self { eps, delta_mech, m, delta };
        b.check()?;
        Ok(b)
    }

    /// Pure DP: `Δ = δ = 0`.
    pub fn pure(eps: f64, m: f64) -> Result<Self> {
        Self::new(eps, 0.0, m, 0.0)
    }

    /// `δ = 1 − (1 − Δ)^m`, the failure probability of `m`-fold composition.
    pub fn one_minus_pow(eps: f64, delta_mech: f64, m: f64) -> Result<Self> {
        // δ ≥ Δ whenever m ≥ 1; rounding can push it just below
        let delta = (-(m * (-delta_mech).ln_1p()).exp_m1()).max(delta_mech);
        Self::new(eps, delta_mech, m, delta)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return domain(format!("eps must be positive and finite, got {}", self.eps));
        }
        if !(0.0..1.0).contains(&self.delta_mech) {
            return domain(format!("Delta must lie in [0,1), got {}", self.delta_mech));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return domain(format!("delta must lie in [0,1), got {}", self.delta));
        }
        if self.delta < self.delta_mech {
            return domain(format!("delta {} is below Delta {}", self.delta, self.delta_mech));
        }
        if !(self.m >= 1.0 && self.m.is_finite()) {
            return domain(format!("m must be at least 1, got {}", self.m));
        }
        Ok(())
    }

    pub fn check_for(&self, k: usize) -> Result<()> {
        self.check()?;
        if self.m > k as f64 {
            return domain(format!("m = {} exceeds K = {k}", self.m));
        }
        Ok(())
    }

    /// `e^{mε} − 1 + 2δ`.
    pub fn bound(&self) -> f64 {
        (self.m * self.eps).exp_m1() + 2.0 * self.delta
    }

    /// `e^{mε}`.
    pub fn factor(&self) -> f64 {
        (self.m * self.eps).exp()
    }
}

/// Coefficients `w_l` with `f = Σ_l w_l γ(l)`: `e α'_l − α_l` below `K/2` and
/// `α_l − e α'_l` above, where `e = e^{mε}`.
pub fn cost_weights<T: Scalar>(alpha: &[T], alpha_prime: &[T], factor: &T) -> Vec<T> {
    let h = alpha.len() / 2;
    alpha
        .iter()
        .zip(alpha_prime)
        .enumerate()
        .map(|(l, (a, b))| {
            let eb = factor.clone() * b.clone();
            if l < h {
                eb - a.clone()
            } else {
                a.clone() - eb
            }
        })
        .collect()
}

/// `f` with `e^{mε}` supplied directly, so exact scalars can be used.
pub fn privacy_cost_with_factor<T: Scalar>(g: &NoiseFn<T>, alpha: &Pmf<T>, alpha_prime: &Pmf<T>, factor: T) -> Result<T> {
    let k = g.k();
    if alpha.k() != k || alpha_prime.k() != k {
        return domain(format!(
            "length mismatch: gamma has K = {k}, pmfs have K = {} and {}",
            alpha.k(),
            alpha_prime.k()
        ));
    }
    Ok(cost_weights(alpha.mass(), alpha_prime.mass(), &factor)
        .into_iter()
        .zip(g.values())
        .fold(T::zero(), |acc, (w, v)| acc + w * v.clone()))
}

/// The privacy cost objective: DaRRM with `γ` is `(mε, δ)`-DP iff this is at
/// most `e^{mε} − 1 + 2δ` for every feasible pair of datasets.
pub fn privacy_cost_f<T: Real>(g: &NoiseFn<T>, alpha: &Pmf<T>, alpha_prime: &Pmf<T>, m: T, eps: T) -> Result<T> {
    privacy_cost_with_factor(g, alpha, alpha_prime, (m * eps).exp())
}
