//! Built-in experiments.

use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use rayon::prelude::*;

use darrm::eval::{expected_error, fmt_f64, write_error_rows, write_shape_rows, SweepKey, SWEEP_HEADER};
use darrm::gammas::{gamma_const, gamma_dsub, gamma_sub, NoiseFn};
use darrm::optimizer::{objective_coeffs, optimize_with_coeffs, OptimizeOptions, Prior, SolverMode};
use darrm::privacy::{general_composition, gnmax_sigma, PrivacyBudget};

use crate::output::{fmt4, write_atomic};
use crate::{rr_p_const, Failure, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// K = 11, eps = 0.1, Delta = 1e-5, m in {1,3,5,7}.
    #[value(name = "fig2")]
    Fig2,
    /// Pure DP, K = 11, m in {1,3,5,7,9,11}.
    #[value(name = "appD2_K11")]
    AppD2K11,
    /// Pure DP, K = 101, m in {10,20,30,40,60,80}.
    #[value(name = "appD2_K101")]
    AppD2K101,
    /// General-composition parameters for K = 35, eps = 0.1, Delta = 1e-5.
    #[value(name = "appE1_table")]
    AppE1Table,
    /// GNMax noise for the two per-query budgets.
    #[value(name = "gnmax_table")]
    GnmaxTable,
}

impl Scenario {
    fn name(self) -> &'static str {
        match self {
            Scenario::Fig2 => "fig2",
            Scenario::AppD2K11 => "appD2_K11",
            Scenario::AppD2K101 => "appD2_K101",
            Scenario::AppE1Table => "appE1_table",
            Scenario::GnmaxTable => "gnmax_table",
        }
    }
}

pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

struct Sweep {
    k: usize,
    eps: f64,
    delta_mech: f64,
    ms: &'static [f64],
    dsub: bool,
}

/// Grid step for the error curves over i.i.d. `p`.
const ERROR_STEP: f64 = 0.01;

fn budget(s: &Sweep, m: f64) -> darrm::Result<PrivacyBudget> {
    if s.delta_mech > 0.0 {
        PrivacyBudget::one_minus_pow(s.eps, s.delta_mech, m)
    } else {
        PrivacyBudget::pure(s.eps, m)
    }
}

fn run_sweep(name: &str, s: &Sweep, out: &Path, seed: u64, trials: u64, solver: Option<SolverMode>) -> Outcome {
    let prior = Prior::uniform();
    let opts = OptimizeOptions { t: trials, seed, solver, ..Default::default() };
    let coeffs = objective_coeffs(s.k, &prior, &opts)?;
    let per_m = par_map(s.ms, |&m| -> darrm::Result<Vec<(&'static str, NoiseFn<f64>, f64)>> {
        let b = budget(s, m)?;
        let mi = m as usize;
        let mut gammas = vec![("opt", optimize_with_coeffs(&coeffs, &b, &opts)?.gamma), ("sub", gamma_sub(s.k, mi)?)];
        if s.dsub {
            gammas.push(("dsub", gamma_dsub(s.k, mi)?));
        }
        gammas.push(("const", gamma_const(s.k, rr_p_const(s.k, &b)?)?));
        gammas
            .into_iter()
            .map(|(kind, g)| {
                let e = expected_error(&g, &prior, trials, seed)?;
                Ok((kind, g, e))
            })
            .collect()
    });
    let mut shape = format!("{SWEEP_HEADER}\n").into_bytes();
    let mut error = shape.clone();
    let mut expected = String::from("K,m,eps,Delta,delta,gamma_kind,expected_error\n");
    println!("{name}: expected error under the uniform prior (T = {trials}, seed = {seed})");
    for (&m, rows) in s.ms.iter().zip(per_m) {
        let rows = rows?;
        let b = budget(s, m)?;
        let mut line = format!("  m = {m:>3}:");
        for (kind, g, e) in &rows {
            let key = SweepKey {
                k: s.k,
                m,
                eps: s.eps,
                delta_mech: s.delta_mech,
                delta: b.delta,
                gamma_kind: (*kind).into(),
            };
            write_shape_rows(&mut shape, &key, g)?;
            write_error_rows(&mut error, &key, g, ERROR_STEP)?;
            writeln!(
                expected,
                "{},{},{},{},{},{kind},{}",
                s.k,
                fmt_f64(m),
                fmt_f64(s.eps),
                fmt_f64(s.delta_mech),
                fmt_f64(b.delta),
                fmt_f64(*e)
            )
            .expect("string write");
            write!(line, " {kind} {}", fmt4(*e)).expect("string write");
        }
        println!("{line}");
        if m == 1.0 {
            let gap = rows[0].1.values().iter().zip(rows[1].1.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            println!("  m = 1: max |gamma_opt - gamma_sub| = {gap:.3e}");
        }
    }
    write_atomic(&out.join(format!("{name}_shape.csv")), &shape)?;
    write_atomic(&out.join(format!("{name}_error.csv")), &error)?;
    write_atomic(&out.join(format!("{name}_expected.csv")), expected.as_bytes())?;
    Ok(())
}

struct TableRow {
    row: String,
    quantity: &'static str,
    computed: f64,
    reference: f64,
}

fn write_table(name: &str, rows: &[TableRow], out: &Path) -> Outcome {
    let mut csv = String::from("row,quantity,computed,reference,abs_diff\n");
    println!("{:<16} {:<10} {:>10} {:>10} {:>10}", "row", "quantity", "computed", "reference", "abs_diff");
    for r in rows {
        let diff = (r.computed - r.reference).abs();
        writeln!(csv, "{},{},{},{},{}", r.row, r.quantity, fmt4(r.computed), fmt4(r.reference), fmt_f64(diff))
            .expect("string write");
        println!(
            "{:<16} {:<10} {:>10} {:>10} {:>10.2e}",
            r.row,
            r.quantity,
            fmt4(r.computed),
            fmt4(r.reference),
            diff
        );
    }
    write_atomic(&out.join(format!("{name}.csv")), csv.as_bytes())?;
    Ok(())
}

fn app_e1_rows() -> darrm::Result<Vec<TableRow>> {
    let (eps, dm, dp) = (0.1, 1e-5, 0.1);
    let mut rows = Vec::new();
    for (big_m, m, me, d) in [
        (10, 6.4521, 0.6452, 0.1001),
        (13, 7.5742, 0.7574, 0.1001),
        (15, 8.2708, 0.8271, 0.1001),
        (20, 9.8823, 0.9882, 0.1002),
    ] {
        let (e, dt) = general_composition(big_m, eps, dm, dp)?;
        let row = format!("M={big_m}");
        rows.push(TableRow { row: row.clone(), quantity: "m", computed: e / eps, reference: m });
        rows.push(TableRow { row: row.clone(), quantity: "m_eps", computed: e, reference: me });
        rows.push(TableRow { row, quantity: "delta", computed: dt, reference: d });
    }
    let (e, lambda) = general_composition(35, eps, dm, dp)?;
    rows.push(TableRow { row: "K=35".into(), quantity: "tau", computed: e / eps, reference: 14.0328 });
    rows.push(TableRow { row: "K=35".into(), quantity: "lambda", computed: lambda, reference: 0.1003 });
    Ok(rows)
}

fn gnmax_rows() -> darrm::Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for (label, eps, delta, lambda, sigma) in
        [("MNIST", 0.2676, 0.0003, 34.31, 21.46), ("Fashion-MNIST", 0.2556, 0.0003, 35.74, 22.46)]
    {
        let r = gnmax_sigma(eps, delta, 500.0, 0.5)?;
        rows.push(TableRow { row: label.into(), quantity: "lambda", computed: r.lambda, reference: lambda });
        rows.push(TableRow { row: label.into(), quantity: "sigma", computed: r.sigma, reference: sigma });
    }
    Ok(rows)
}

pub fn run(scenario: Scenario, out: &Path, seed: u64, trials: u64, solver: Option<SolverMode>) -> Outcome {
    if trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    std::fs::create_dir_all(out)?;
    let name = scenario.name();
    match scenario {
        Scenario::Fig2 => {
            let s = Sweep { k: 11, eps: 0.1, delta_mech: 1e-5, ms: &[1.0, 3.0, 5.0, 7.0], dsub: false };
            run_sweep(name, &s, out, seed, trials, solver)
        }
        Scenario::AppD2K11 => {
            let s = Sweep { k: 11, eps: 0.1, delta_mech: 0.0, ms: &[1.0, 3.0, 5.0, 7.0, 9.0, 11.0], dsub: true };
            run_sweep(name, &s, out, seed, trials, solver)
        }
        Scenario::AppD2K101 => {
            let s = Sweep { k: 101, eps: 0.1, delta_mech: 0.0, ms: &[10.0, 20.0, 30.0, 40.0, 60.0, 80.0], dsub: true };
            run_sweep(name, &s, out, seed, trials, solver)
        }
        Scenario::AppE1Table => write_table(name, &app_e1_rows()?, out),
        Scenario::GnmaxTable => write_table(name, &gnmax_rows()?, out),
    }
}
