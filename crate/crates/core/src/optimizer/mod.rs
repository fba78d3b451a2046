//! The linear program for the utility-optimal noise function.
//!
//! Variables are `γ(l)` for `l = (K+1)/2..K` (the lower half follows by
//! symmetry), the objective is `Σ c_l γ(l)` with `c_l = E[α_l − α_{K−l}]`,
//! and there is one privacy row per corner multiset.

mod coeffs;
mod config;
mod prior;

use serde::{Deserialize, Serialize};

use crate::error::{domain, DarrmError, Result};
use crate::gammas::{gamma_sub, NoiseFn};
use crate::lp::{LinearProgram, LpStatus};
use crate::privacy::{
    corner_set, cost_weights, fold_multisets, multiset_count, verify_general, PrivacyBudget, VERIFY_TOL,
};

pub use coeffs::{objective_coeffs_integration, objective_coeffs_naive, Method, ObjectiveCoeffs};
pub use config::{Allowance, DeltaRule, OptimizerConfig};
pub use prior::Prior;

/// Above this many rows the full program is not materialized by default.
pub const FULL_ROW_LIMIT: u64 = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Full,
    Rowgen,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpModel {
    pub k: usize,
    pub budget: PrivacyBudget,
    pub objective: Vec<f64>,
    pub corners: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// Every row of the fully materialized program was checked.
    FullLp,
    /// The final row-generation scan found no violated row.
    RowGeneration,
    /// The returned function was re-verified by enumeration.
    VerifyGeneral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    /// Largest `f − (e^{mε} − 1 + 2δ)` over the checked constraints.
    pub max_violation: f64,
    pub constraints_checked: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    #[serde(flatten)]
    pub gamma: NoiseFn<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub active_constraints: usize,
    pub status: LpStatus,
    pub certificate: Certificate,
    pub solver: SolverMode,
    pub rounds: usize,
    /// The LP result was replaced by the subsampling function.
    pub fallback: bool,
    /// The objective was identically zero, so any feasible point is optimal.
    pub degenerate: bool,
}

impl LpModel {
    pub fn n(&self) -> usize {
        self.k / 2 + 1
    }

    pub fn row_count(&self) -> u64 {
        multiset_count(self.k, self.corners.len())
    }

    pub fn rhs(&self) -> f64 {
        self.budget.bound()
    }

    /// Row coefficients `w_l + w_{K−l}` of the variable `γ(l)`.
    pub fn row_from_pmfs(&self, alpha: &[f64], alpha_prime: &[f64]) -> Vec<f64> {
        let w = cost_weights(alpha, alpha_prime, &self.budget.factor());
        let h = self.n();
        (h..=self.k).map(|l| w[l] + w[self.k - l]).collect()
    }

    pub fn materialize_rows(&self) -> Vec<Vec<f64>> {
        fold_multisets(
            self.k,
            &self.corners,
            Vec::new,
            |rows: &mut Vec<Vec<f64>>, _, _, a, b| rows.push(self.row_from_pmfs(a, b)),
            |mut x, y| {
                x.extend(y);
                x
            },
        )
    }

    fn program(&self, rows: Vec<Vec<f64>>) -> LinearProgram<f64> {
        let n = self.n();
        let mut objectives = vec![self.objective.clone()];
        for j in (0..n).rev() {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            objectives.push(e);
        }
        let rhs = vec![self.rhs(); rows.len()];
        LinearProgram { objectives, rows, rhs, lower: vec![0.0; n], upper: vec![1.0; n] }
    }

    /// Most violated row at `x`: `(row·x − rhs, row, multiset index)`.
    fn most_violated(&self, x: &[f64]) -> (f64, Vec<f64>, u64) {
        let rhs = self.rhs();
        fold_multisets(
            self.k,
            &self.corners,
            || (f64::NEG_INFINITY, Vec::new(), 0),
            |best: &mut (f64, Vec<f64>, u64), i, _, a, b| {
                let row = self.row_from_pmfs(a, b);
                let v = row.iter().zip(x).map(|(r, v)| r * v).sum::<f64>() - rhs;
                if v > best.0 {
                    *best = (v, row, i);
                }
            },
            |p, q| if q.0 > p.0 { q } else { p },
        )
    }

    pub fn gamma_from(&self, x: &[f64]) -> Result<NoiseFn<f64>> {
        let (h, k) = (self.n(), self.k);
        let values = (0..=k).map(|l| x[l.max(k - l) - h].clamp(0.0, 1.0)).collect();
        NoiseFn::checked(k, values)
    }

    pub fn objective_value(&self, g: &NoiseFn<f64>) -> f64 {
        let h = self.n();
        self.objective.iter().enumerate().map(|(j, c)| c * g.get(h + j)).sum()
    }
}

/// Assembles the program; rows are produced on demand by the solver.
pub fn build_lp(coeffs: &ObjectiveCoeffs, budget: &PrivacyBudget, k: usize) -> Result<LpModel> {
    if coeffs.k != k || coeffs.values.len() != k / 2 + 1 {
        return domain(format!("coefficients are for K = {}, not {k}", coeffs.k));
    }
    if coeffs.values.iter().any(|c| !c.is_finite()) {
        return domain("objective coefficients must be finite");
    }
    budget.check_for(k)?;
    let corners = corner_set(budget.eps, budget.delta_mech)?.pairs;
    Ok(LpModel { k, budget: *budget, objective: coeffs.values.clone(), corners })
}

/// Row generation above `K = 7` with `Δ > 0`, or whenever the full program
/// would exceed [`FULL_ROW_LIMIT`] rows.
pub fn default_solver(model: &LpModel) -> SolverMode {
    if (model.budget.delta_mech > 0.0 && model.k > 7) || model.row_count() > FULL_ROW_LIMIT {
        SolverMode::Rowgen
    } else {
        SolverMode::Full
    }
}

pub fn solve_lp(model: &LpModel, mode: SolverMode, max_iters: usize) -> Result<LpSolution> {
    let (x, status, iterations, active, rounds, certificate) = match mode {
        SolverMode::Full => {
            let lp = model.program(model.materialize_rows());
            let r = lp.solve(max_iters)?;
            let cert = Certificate {
                kind: CertificateKind::FullLp,
                max_violation: model.most_violated(&r.x).0,
                constraints_checked: lp.m() as u64,
            };
            let active = r.active_rows(lp.m());
            (r.x, r.status, r.iterations, active, 1, cert)
        }
        SolverMode::Rowgen => {
            let mut rows: Vec<Vec<f64>> = (0..model.corners.len())
                .map(|j| {
                    let (p, q) = model.corners[j];
                    let a = crate::dist::convolve(&vec![p; model.k]);
                    let b = crate::dist::convolve(&vec![q; model.k]);
                    model.row_from_pmfs(&a, &b)
                })
                .collect();
            let mut iterations = 0;
            let mut rounds = 0;
            loop {
                rounds += 1;
                let lp = model.program(rows.clone());
                let r = lp.solve(max_iters)?;
                iterations += r.iterations;
                if r.status != LpStatus::Optimal {
                    let cert = Certificate {
                        kind: CertificateKind::RowGeneration,
                        max_violation: f64::INFINITY,
                        constraints_checked: 0,
                    };
                    let active = r.active_rows(lp.m());
                    break (r.x, r.status, iterations, active, rounds, cert);
                }
                let (viol, row, _) = model.most_violated(&r.x);
                if viol <= VERIFY_TOL || rounds >= max_iters || rows.contains(&row) {
                    let status = if viol <= VERIFY_TOL { LpStatus::Optimal } else { LpStatus::IterationLimit };
                    let cert = Certificate {
                        kind: CertificateKind::RowGeneration,
                        max_violation: viol,
                        constraints_checked: model.row_count(),
                    };
                    let active = r.active_rows(lp.m());
                    break (r.x, status, iterations, active, rounds, cert);
                }
                rows.push(row);
            }
        }
    };
    let gamma = model.gamma_from(&x)?;
    Ok(LpSolution {
        objective_value: model.objective_value(&gamma),
        gamma,
        iterations,
        active_constraints: active,
        status,
        certificate,
        solver: mode,
        rounds,
        fallback: false,
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizeOptions {
    pub method: Method,
    pub t: u64,
    pub tau: usize,
    pub seed: u64,
    /// `None` picks [`default_solver`].
    pub solver: Option<SolverMode>,
    pub max_iters: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { method: Method::Integration, t: 10_000, tau: 50, seed: 0, solver: None, max_iters: 10_000 }
    }
}

pub fn objective_coeffs(k: usize, prior: &Prior, opts: &OptimizeOptions) -> Result<ObjectiveCoeffs> {
    match opts.method {
        Method::Naive => objective_coeffs_naive(k, prior, opts.t, opts.seed),
        Method::Integration => objective_coeffs_integration(k, prior, opts.t, opts.tau, opts.seed),
    }
}

/// Estimates the objective, solves the program and re-verifies the result.
/// If the solver does not reach a verified optimum, the subsampling function
/// `γ_Sub(K, ⌊m⌋)`, which is always feasible, is returned instead with
/// `fallback` set.
pub fn optimize_gamma(k: usize, budget: &PrivacyBudget, prior: &Prior, opts: &OptimizeOptions) -> Result<LpSolution> {
    let coeffs = objective_coeffs(k, prior, opts)?;
    optimize_with_coeffs(&coeffs, budget, opts)
}

pub fn optimize_with_coeffs(coeffs: &ObjectiveCoeffs, budget: &PrivacyBudget, opts: &OptimizeOptions) -> Result<LpSolution> {
    let k = coeffs.k;
    let model = build_lp(coeffs, budget, k)?;
    let mode = opts.solver.unwrap_or_else(|| default_solver(&model));
    let mut sol = solve_lp(&model, mode, opts.max_iters)?;
    sol.degenerate = coeffs.is_zero();
    let mut verified = sol.status == LpStatus::Optimal && sol.certificate.max_violation <= VERIFY_TOL;
    if verified {
        match verify_general(&sol.gamma, budget) {
            Ok(report) => {
                sol.certificate = Certificate {
                    kind: CertificateKind::VerifyGeneral,
                    max_violation: report.max_f - report.bound,
                    constraints_checked: report.constraints_checked,
                };
                verified = report.ok;
            }
            // too large to enumerate: the row-generation scan stands
            Err(DarrmError::Resource(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if !verified {
        let g = gamma_sub(k, budget.m.floor() as usize)?;
        sol.objective_value = model.objective_value(&g);
        sol.gamma = g;
        sol.fallback = true;
    }
    Ok(sol)
}

#[cfg(test)]
mod tests;
