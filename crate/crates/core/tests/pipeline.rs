use darrm::dist::ProbVector;
use darrm::eval::{error_closed_form, expected_error};
use darrm::gammas::{gamma_dsub, gamma_sub, NoiseFn};
use darrm::optimizer::{optimize_gamma, OptimizeOptions, OptimizerConfig, Prior};
use darrm::privacy::{verify_general, verify_iid_boundary, PrivacyBudget};
use proptest::prelude::*;

#[test]
fn config_to_verified_gamma() {
    let cfg = OptimizerConfig::from_json_str(r#"{"K": 9, "eps": 0.1, "Delta": 1e-5, "m": [2, 4], "T": 2000, "seed": 1}"#)
        .unwrap();
    let prior = cfg.prior.clone();
    for m in cfg.m.values() {
        let b = cfg.budget_for(m).unwrap();
        let s = optimize_gamma(cfg.k, &b, &prior, &cfg.options()).unwrap();
        assert!(!s.fallback);
        assert!(verify_general(&s.gamma, &b).unwrap().ok);
        let back = NoiseFn::from_json_str(&s.gamma.to_json_string()).unwrap();
        assert_eq!(back, s.gamma);
        let sub = gamma_sub(cfg.k, m as usize).unwrap();
        assert!(expected_error(&s.gamma, &prior, 2000, 1).unwrap() <= expected_error(&sub, &prior, 2000, 1).unwrap());
    }
}

#[test]
fn large_ensemble_double_subsampling_is_private() {
    for m in [10, 25] {
        let g = gamma_dsub::<f64>(101, m).unwrap();
        let r = verify_iid_boundary(&g, m as f64, 0.1, 1e-3).unwrap();
        assert!(r.ok, "m={m}: {} > {}", r.max_f, r.bound);
    }
}

#[test]
fn optimized_gamma_is_at_least_as_good_at_fixed_p_on_average() {
    let prior = Prior::uniform();
    let b = PrivacyBudget::pure(0.1, 3.0).unwrap();
    let s = optimize_gamma(11, &b, &prior, &OptimizeOptions { t: 3000, ..Default::default() }).unwrap();
    let sub = gamma_sub::<f64>(11, 3).unwrap();
    let (mut a, mut c) = (0.0, 0.0);
    for i in 0..=100 {
        let p = ProbVector::iid(11, i as f64 / 100.0).unwrap();
        a += error_closed_form(&s.gamma, &p).unwrap().error;
        c += error_closed_form(&sub, &p).unwrap().error;
    }
    assert!(a <= c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn subsampling_meets_its_budget(half in 1usize..=6, eps in 0.01..1.0f64, dm in prop_oneof![Just(0.0), 1e-6..1e-3f64]) {
        let k = 2 * half + 1;
        for m in 1..=k {
            let b = PrivacyBudget::one_minus_pow(eps, dm, m as f64).unwrap();
            prop_assert!(verify_general(&gamma_sub(k, m).unwrap(), &b).unwrap().ok);
        }
    }
}
