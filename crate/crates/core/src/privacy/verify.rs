use serde::{Deserialize, Serialize};

use super::{corner_set, cost_weights, fold_multisets, multiset_count, PrivacyBudget};
use crate::dist::binomial_pmf;
use crate::error::{DarrmError, Result};
use crate::gammas::NoiseFn;

/// Slack allowed on the privacy inequality.
pub const VERIFY_TOL: f64 = 1e-9;

/// One `(p_i, p_i')` pair per mechanism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CornerAssignment {
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub max_f: f64,
    pub bound: f64,
    pub argmax: CornerAssignment,
    pub constraints_checked: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Largest `K` enumerated when `Δ > 0` unless `allow_large` is set.
    pub max_k_with_delta: usize,
    pub allow_large: bool,
    /// Hard cap on the number of multisets, override or not.
    pub max_constraints: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { max_k_with_delta: 15, allow_large: false, max_constraints: 500_000_000 }
    }
}

pub fn verify_general(g: &NoiseFn<f64>, budget: &PrivacyBudget) -> Result<VerifyReport> {
    verify_general_with(g, budget, &VerifyOptions::default())
}

/// Maximizes `f` over every corner multiset and compares it with
/// `e^{mε} − 1 + 2δ`.
pub fn verify_general_with(g: &NoiseFn<f64>, budget: &PrivacyBudget, opts: &VerifyOptions) -> Result<VerifyReport> {
    g.ensure_valid()?;
    let k = g.k();
    budget.check_for(k)?;
    if budget.delta_mech > 0.0 && k > opts.max_k_with_delta && !opts.allow_large {
        return Err(DarrmError::Resource(format!(
            "K = {k} with Delta > 0 exceeds the enumeration cap of {}",
            opts.max_k_with_delta
        )));
    }
    let corners = corner_set(budget.eps, budget.delta_mech)?.pairs;
    let total = multiset_count(k, corners.len());
    if total > opts.max_constraints {
        return Err(DarrmError::Resource(format!("{total} constraint multisets exceed the cap")));
    }
    let factor = budget.factor();
    let gamma = g.values();
    let (max_f, arg) = fold_multisets(
        k,
        &corners,
        || (f64::NEG_INFINITY, Vec::new()),
        |best: &mut (f64, Vec<usize>), _, idx, a, b| {
            let f: f64 = cost_weights(a, b, &factor).iter().zip(gamma).map(|(w, v)| w * v).sum();
            if f > best.0 {
                *best = (f, idx.to_vec());
            }
        },
        |x, y| if y.0 > x.0 { y } else { x },
    );
    let bound = budget.bound();
    Ok(VerifyReport {
        ok: max_f <= bound + VERIFY_TOL,
        max_f,
        bound,
        argmax: CornerAssignment { pairs: arg.iter().map(|&j| corners[j]).collect() },
        constraints_checked: total,
    })
}

/// Worst point found on the two i.i.d. boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IidReport {
    pub ok: bool,
    pub max_f: f64,
    pub bound: f64,
    pub p: f64,
    pub p_prime: f64,
}

fn cost_at(g: &NoiseFn<f64>, factor: f64, p: f64, q: f64) -> Result<f64> {
    let k = g.k();
    let a = binomial_pmf(k, p.clamp(0.0, 1.0))?;
    let b = binomial_pmf(k, q.clamp(0.0, 1.0))?;
    Ok(cost_weights(a.mass(), b.mass(), &factor).iter().zip(g.values()).map(|(w, v)| w * v).sum())
}

fn grid(lo: f64, hi: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = ((hi - lo) / step).ceil().max(0.0) as usize;
    (0..=n).map(move |i| (lo + i as f64 * step).min(hi))
}

/// Scans the two boundaries on which the worst case for i.i.d. mechanisms
/// lies when `γ` is symmetric and monotone:
/// `p = e^ε p'` for `p' ≤ 1/(1+e^ε)` and `1 − p' = e^ε (1 − p)` for
/// `p ≥ e^ε/(1+e^ε)`. The coarse argmax is refined at a tenth of the step.
pub fn verify_iid_boundary(g: &NoiseFn<f64>, m: f64, eps: f64, grid_step: f64) -> Result<IidReport> {
    g.ensure_valid()?;
    if !g.is_monotone() {
        return Err(DarrmError::Precondition(
            "the boundary reduction needs gamma monotone away from K/2".into(),
        ));
    }
    if !(eps > 0.0 && m >= 1.0 && grid_step > 0.0 && grid_step <= 1.0) {
        return crate::error::domain(format!("bad arguments: eps={eps}, m={m}, step={grid_step}"));
    }
    let factor = (m * eps).exp();
    let e = eps.exp();
    let t_max = 1.0 / (1.0 + e);
    let curves: [(f64, f64, Box<dyn Fn(f64) -> (f64, f64)>); 2] = [
        (0.0, t_max, Box::new(|t| (e * t, t))),
        (e / (1.0 + e), 1.0, Box::new(|p| (p, 1.0 - e * (1.0 - p)))),
    ];
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for (lo, hi, at) in &curves {
        let mut local = (f64::NEG_INFINITY, *lo);
        for t in grid(*lo, *hi, grid_step) {
            let (p, q) = at(t);
            let f = cost_at(g, factor, p, q)?;
            if f > local.0 {
                local = (f, t);
            }
        }
        let (a, b) = ((local.1 - grid_step).max(*lo), (local.1 + grid_step).min(*hi));
        for t in grid(a, b, grid_step / 10.0) {
            let (p, q) = at(t);
            let f = cost_at(g, factor, p, q)?;
            if f > local.0 {
                local = (f, t);
            }
        }
        if local.0 > best.0 {
            let (p, q) = at(local.1);
            best = (local.0, p, q);
        }
    }
    let bound = (m * eps).exp_m1();
    Ok(IidReport { ok: best.0 <= bound + VERIFY_TOL, max_f: best.0, bound, p: best.1, p_prime: best.2 })
}
