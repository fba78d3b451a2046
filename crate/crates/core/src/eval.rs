//! Error of a noise function: TV distance between DaRRM's output and the
//! true majority, per fixed `p` and in expectation over a prior.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dist::{binomial_pmf, poisson_binomial_pmf, poisson_binomial_slice, Pmf, ProbVector};
use crate::error::{domain, Result};
use crate::gammas::NoiseFn;
use crate::mechanism::{darrm_output_prob, sharded, simulate_darrm};
use crate::optimizer::Prior;
use crate::scalar::{abs, half, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMethod {
    ClosedForm,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport<T = f64> {
    pub error: T,
    pub pr_true_majority: T,
    pub pr_mechanism: T,
    pub method: ErrorMethod,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

/// `|½ Σ_{l ≥ (K+1)/2} (1 − γ(l))(α_l − α_{K−l})|` for a given pmf.
pub fn error_from_pmf<T: Scalar>(g: &NoiseFn<T>, alpha: &Pmf<T>) -> Result<ErrorReport<T>> {
    let k = g.k();
    if alpha.k() != k {
        return domain(format!("gamma has K = {k} but the pmf has K = {}", alpha.k()));
    }
    let mut sum = T::zero();
    let mut maj = T::zero();
    for l in k / 2 + 1..=k {
        sum = sum + (T::one() - g.get(l)) * (alpha.get(l) - alpha.get(k - l));
        maj = maj + alpha.get(l);
    }
    Ok(ErrorReport {
        error: abs(half::<T>() * sum),
        pr_true_majority: maj,
        pr_mechanism: darrm_output_prob(g, alpha)?,
        method: ErrorMethod::ClosedForm,
        trials: None,
        seed: None,
    })
}

pub fn error_closed_form<T: Scalar>(g: &NoiseFn<T>, p: &ProbVector<T>) -> Result<ErrorReport<T>> {
    if g.k() != p.k() {
        return domain(format!("gamma has K = {} but p has {} entries", g.k(), p.k()));
    }
    error_from_pmf(g, &poisson_binomial_pmf(p)?)
}

/// Estimates `Pr[DaRRM = 1]` by simulation and compares it with the exact
/// majority probability.
pub fn error_monte_carlo(g: &NoiseFn<f64>, p: &ProbVector<f64>, trials: u64, seed: u64) -> Result<ErrorReport> {
    if trials == 0 {
        return domain("need at least one trial");
    }
    let exact = error_closed_form(g, p)?;
    let ones = simulate_darrm(g, p, trials, seed)?;
    let pr = ones as f64 / trials as f64;
    Ok(ErrorReport {
        error: (pr - exact.pr_true_majority).abs(),
        pr_true_majority: exact.pr_true_majority,
        pr_mechanism: pr,
        method: ErrorMethod::MonteCarlo,
        trials: Some(trials),
        seed: Some(seed),
    })
}

/// Mean closed-form error over `T` draws of `p_1..p_K` from the prior.
pub fn expected_error(g: &NoiseFn<f64>, prior: &Prior, t: u64, seed: u64) -> Result<f64> {
    if t == 0 {
        return domain("T must be at least 1");
    }
    let k = g.k();
    let total = sharded(
        t,
        seed,
        || 0.0,
        |rng, acc, _| {
            let p: Vec<f64> = (0..k).map(|_| prior.sample(rng)).collect();
            let pmf = poisson_binomial_slice(&p).expect("prior draws lie in [0,1]");
            *acc += error_from_pmf(g, &pmf).expect("sizes match").error;
        },
        |a, b| a + b,
    );
    Ok(total / t as f64)
}

/// Error floor for `m = 1`: `|Pr[g(S) = 1] − mean(p)|`.
pub fn lower_bound_m1(p: &ProbVector<f64>) -> Result<f64> {
    let pmf = poisson_binomial_pmf(p)?;
    let maj: f64 = pmf.mass()[p.k() / 2 + 1..].iter().sum();
    let mean = p.values().iter().sum::<f64>() / p.k() as f64;
    Ok((maj - mean).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    /// Whether `1 ≥ γ1 ≥ γ2 ≥ 0` holds pointwise and both are symmetric.
    pub comparable: bool,
    pub holds: bool,
    /// Largest `E(γ1, p) − E(γ2, p)` seen on the grid.
    pub max_gap: f64,
    pub counterexample: Option<f64>,
    pub points_checked: usize,
}

/// Checks `E(γ1, p) ≤ E(γ2, p) + 1e−12` for i.i.d. `p` on a grid, provided
/// `γ1 ≥ γ2` pointwise.
pub fn dominance_check(g1: &NoiseFn<f64>, g2: &NoiseFn<f64>, step: f64) -> Result<DominanceReport> {
    if g1.k() != g2.k() {
        return domain("noise functions have different K");
    }
    if !(step > 0.0 && step <= 1.0) {
        return domain(format!("bad grid step {step}"));
    }
    let ordered = g1.values().iter().zip(g2.values()).all(|(a, b)| a >= b);
    if !ordered || g1.validate().is_err() || g2.validate().is_err() {
        return Ok(DominanceReport {
            comparable: false,
            holds: false,
            max_gap: f64::NAN,
            counterexample: None,
            points_checked: 0,
        });
    }
    let n = (1.0 / step).round() as usize;
    let mut report =
        DominanceReport { comparable: true, holds: true, max_gap: f64::NEG_INFINITY, counterexample: None, points_checked: 0 };
    for i in 0..=n {
        let p = (i as f64 * step).min(1.0);
        let pmf = binomial_pmf(g1.k(), p)?;
        let gap = error_from_pmf(g1, &pmf)?.error - error_from_pmf(g2, &pmf)?.error;
        report.points_checked += 1;
        report.max_gap = report.max_gap.max(gap);
        if gap > 1e-12 && report.counterexample.is_none() {
            report.holds = false;
            report.counterexample = Some(p);
        }
    }
    Ok(report)
}

/// Labels shared by every row of one sweep series.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepKey {
    pub k: usize,
    pub m: f64,
    pub eps: f64,
    pub delta_mech: f64,
    pub delta: f64,
    pub gamma_kind: String,
}

pub const SWEEP_HEADER: &str = "K,m,eps,Delta,delta,gamma_kind,l_or_p,value";

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_row<W: Write>(out: &mut W, key: &SweepKey, at: &str, value: f64) -> Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{at},{}",
        key.k,
        fmt_f64(key.m),
        fmt_f64(key.eps),
        fmt_f64(key.delta_mech),
        fmt_f64(key.delta),
        key.gamma_kind,
        fmt_f64(value)
    )?;
    Ok(())
}

/// One row per support point: `γ(l)`.
pub fn write_shape_rows<W: Write>(out: &mut W, key: &SweepKey, g: &NoiseFn<f64>) -> Result<()> {
    for (l, v) in g.values().iter().enumerate() {
        write_row(out, key, &l.to_string(), *v)?;
    }
    Ok(())
}

/// One row per grid point: the error at i.i.d. `p`.
pub fn write_error_rows<W: Write>(out: &mut W, key: &SweepKey, g: &NoiseFn<f64>, step: f64) -> Result<()> {
    let n = (1.0 / step).round() as usize;
    for i in 0..=n {
        let p = (i as f64 * step).min(1.0);
        let e = error_from_pmf(g, &binomial_pmf(g.k(), p)?)?.error;
        write_row(out, key, &fmt_f64(p), e)?;
    }
    Ok(())
}
