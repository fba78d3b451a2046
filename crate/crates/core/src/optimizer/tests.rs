use super::*;
use crate::dist::convolve;
use crate::gammas::{all_ones, gamma_sub};
use crate::privacy::privacy_cost_f;
use crate::dist::Pmf;

fn coeffs(k: usize, values: Vec<f64>) -> ObjectiveCoeffs {
    ObjectiveCoeffs::given(k, values).unwrap()
}

fn pure(eps: f64, m: f64) -> PrivacyBudget {
    PrivacyBudget::pure(eps, m).unwrap()
}

#[test]
fn model_sizes() {
    let m = build_lp(&coeffs(3, vec![1.0, 1.0]), &pure(0.1, 1.0), 3).unwrap();
    assert_eq!(m.n(), 2);
    assert_eq!(m.row_count(), 20);
    assert_eq!(m.materialize_rows().len(), 20);
    let m = build_lp(&coeffs(11, vec![1.0; 6]), &pure(0.1, 1.0), 11).unwrap();
    assert_eq!((m.n(), m.row_count()), (6, 364));
    assert!(build_lp(&coeffs(11, vec![1.0; 6]), &pure(0.1, 1.0), 9).is_err());
}

#[test]
fn zero_corner_row() {
    let m = build_lp(&coeffs(5, vec![1.0; 3]), &pure(0.1, 2.0), 5).unwrap();
    let rows = m.materialize_rows();
    let row = &rows[0];
    // only γ(0) = γ(5) is charged, at rate e^{mε} − 1
    assert!((row[2] - 0.2f64.exp_m1()).abs() < 1e-15);
    assert!(row[0].abs() < 1e-15 && row[1].abs() < 1e-15);
}

#[test]
fn rows_reproduce_cost() {
    let m = build_lp(&coeffs(5, vec![1.0; 3]), &PrivacyBudget::new(0.3, 1e-3, 1.5, 2e-3).unwrap(), 5).unwrap();
    let g = gamma_sub::<f64>(5, 2).unwrap();
    let idx = [0, 2, 3, 6, 7];
    let a: Vec<f64> = convolve(&idx.iter().map(|&j| m.corners[j].0).collect::<Vec<_>>());
    let b: Vec<f64> = convolve(&idx.iter().map(|&j| m.corners[j].1).collect::<Vec<_>>());
    let row = m.row_from_pmfs(&a, &b);
    let via_row: f64 = row.iter().zip(&g.values()[3..]).map(|(r, v)| r * v).sum();
    let f = privacy_cost_f(&g, &Pmf::new(a).unwrap(), &Pmf::new(b).unwrap(), 1.5, 0.3).unwrap();
    assert!((via_row - f).abs() < 1e-14);
}

#[test]
fn zero_objective_is_feasible() {
    let m = build_lp(&coeffs(5, vec![0.0; 3]), &pure(0.1, 1.0), 5).unwrap();
    let s = solve_lp(&m, SolverMode::Full, 1000).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert_eq!(s.objective_value, 0.0);
    assert!(verify_general(&s.gamma, &pure(0.1, 1.0)).unwrap().ok);
}

#[test]
fn exact_majority_when_allowed() {
    let m = build_lp(&coeffs(3, vec![0.3, 0.2]), &pure(0.1, 3.0), 3).unwrap();
    for rows in m.materialize_rows() {
        assert!(rows.iter().sum::<f64>() <= 0.3f64.exp_m1() + 1e-12);
    }
    let s = solve_lp(&m, SolverMode::Full, 1000).unwrap();
    assert_eq!(s.gamma, all_ones(3));
}

#[test]
fn full_and_rowgen_agree() {
    let c = objective_coeffs_integration(7, &Prior::uniform(), 4000, 50, 2).unwrap();
    for b in [pure(0.1, 2.0), PrivacyBudget::one_minus_pow(0.1, 1e-5, 3.0).unwrap()] {
        let m = build_lp(&c, &b, 7).unwrap();
        let full = solve_lp(&m, SolverMode::Full, 10_000).unwrap();
        let rg = solve_lp(&m, SolverMode::Rowgen, 10_000).unwrap();
        assert_eq!(full.status, LpStatus::Optimal);
        assert_eq!(rg.status, LpStatus::Optimal);
        assert!(rg.certificate.max_violation <= VERIFY_TOL);
        assert!((full.objective_value - rg.objective_value).abs() < 1e-9);
        for (x, y) in full.gamma.values().iter().zip(rg.gamma.values()) {
            assert!((x - y).abs() < 1e-7);
        }
    }
}

#[test]
fn beats_grid_search_k3() {
    let c = coeffs(3, vec![0.37, 0.21]);
    let b = PrivacyBudget::new(0.2, 1e-3, 1.0, 1e-3).unwrap();
    let m = build_lp(&c, &b, 3).unwrap();
    let s = solve_lp(&m, SolverMode::Full, 1000).unwrap();
    let rows = m.materialize_rows();
    assert!(rows.iter().all(|r| r[0] * s.gamma.get(2) + r[1] * s.gamma.get(3) <= m.rhs() + 1e-9));
    let mut best = f64::NEG_INFINITY;
    for i in 0..=20 {
        for j in 0..=20 {
            let x = [i as f64 * 0.05, j as f64 * 0.05];
            if rows.iter().all(|r| r[0] * x[0] + r[1] * x[1] <= m.rhs()) {
                best = best.max(0.37 * x[0] + 0.21 * x[1]);
            }
        }
    }
    assert!(s.objective_value >= best - 1e-6);
}

#[test]
fn scale_invariance() {
    let c = objective_coeffs_integration(9, &Prior::uniform(), 3000, 50, 8).unwrap();
    let b = pure(0.1, 3.0);
    let base = solve_lp(&build_lp(&c, &b, 9).unwrap(), SolverMode::Full, 10_000).unwrap();
    for s in [1e-6, 0.37, 1e4] {
        let scaled = ObjectiveCoeffs { values: c.values.iter().map(|v| v * s).collect(), ..c.clone() };
        let r = solve_lp(&build_lp(&scaled, &b, 9).unwrap(), SolverMode::Full, 10_000).unwrap();
        for (x, y) in base.gamma.values().iter().zip(r.gamma.values()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn improves_on_subsampling() {
    let c = objective_coeffs_integration(9, &Prior::uniform(), 3000, 50, 1).unwrap();
    for m in 1..=4 {
        let b = pure(0.1, m as f64);
        let model = build_lp(&c, &b, 9).unwrap();
        let s = solve_lp(&model, SolverMode::Full, 10_000).unwrap();
        let sub = gamma_sub::<f64>(9, m).unwrap();
        assert!(s.objective_value >= model.objective_value(&sub) - 1e-12);
    }
}

#[test]
fn pipeline_verifies_and_is_deterministic() {
    let opts = OptimizeOptions { t: 2000, seed: 3, ..Default::default() };
    let b = PrivacyBudget::one_minus_pow(0.1, 1e-5, 3.0).unwrap();
    let a = optimize_gamma(7, &b, &Prior::uniform(), &opts).unwrap();
    assert!(!a.fallback);
    assert_eq!(a.certificate.kind, CertificateKind::VerifyGeneral);
    assert!(a.certificate.max_violation <= VERIFY_TOL);
    let again = optimize_gamma(7, &b, &Prior::uniform(), &opts).unwrap();
    assert_eq!(a, again);
}

#[test]
fn degenerate_prior_is_flagged() {
    let opts = OptimizeOptions { t: 100, ..Default::default() };
    let s = optimize_gamma(5, &pure(0.1, 1.0), &Prior::point(0.5).unwrap(), &opts).unwrap();
    assert!(s.degenerate);
    assert_eq!(s.objective_value, 0.0);
    assert!(verify_general(&s.gamma, &pure(0.1, 1.0)).unwrap().ok);
}

#[test]
fn iteration_limit_falls_back() {
    let opts = OptimizeOptions { t: 500, max_iters: 1, solver: Some(SolverMode::Full), ..Default::default() };
    let s = optimize_gamma(7, &pure(0.1, 2.0), &Prior::uniform(), &opts).unwrap();
    assert_eq!(s.status, LpStatus::IterationLimit);
    assert!(s.fallback);
    assert_eq!(s.gamma, gamma_sub(7, 2).unwrap());
}

#[test]
fn solution_json_is_a_noise_fn() {
    let opts = OptimizeOptions { t: 200, ..Default::default() };
    let s = optimize_gamma(3, &pure(0.1, 1.0), &Prior::uniform(), &opts).unwrap();
    let text = serde_json::to_string(&s).unwrap();
    let g = NoiseFn::from_json_str(&text).unwrap();
    assert_eq!(g, s.gamma);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["status"], "optimal");
    assert!(v["certificate"]["max_violation"].is_number());
    let back: LpSolution = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
}
