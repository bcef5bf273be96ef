mod common;

use pml_core::data::{synthetic_dataset, SyntheticSpec};
use pml_core::diagnostics::{
    paired_ttest, rank_report, student_t_two_sided_p, verify_rank_theorem, Verdict,
};
use pml_core::solver::{fit, SchirnParams};
use pml_core::Dataset;
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[test]
fn p_values_match_reference_distribution() {
    let mut rng = common::rng(31);
    for _ in 0..500 {
        let df = rng.random_range(1..60) as f64;
        let t: f64 = rng.random_range(-8.0..8.0);
        let reference = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()));
        let got = student_t_two_sided_p(t, df);
        assert!(
            (got - reference).abs() <= 1e-6,
            "t {t}, df {df}: {got} vs {reference}"
        );
    }
}

#[test]
fn ttest_against_reference_on_random_folds() {
    let mut rng = common::rng(32);
    for _ in 0..200 {
        let k = rng.random_range(2..12);
        let a: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..0.9)).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|v| v - 0.02 + rng.random_range(-0.03..0.03))
            .collect();
        let r = paired_ttest(&a, &b, 0.05).unwrap();
        let reference = 2.0
            * (1.0
                - StudentsT::new(0.0, 1.0, (k - 1) as f64)
                    .unwrap()
                    .cdf(r.t_stat.abs()));
        assert!((r.p_value - reference).abs() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ttest_is_antisymmetric(a in prop::collection::vec(0f64..1.0, 5), b in prop::collection::vec(0f64..1.0, 5)) {
        let ab = paired_ttest(&a, &b, 0.05).unwrap();
        let ba = paired_ttest(&b, &a, 0.05).unwrap();
        prop_assert_eq!(ab.verdict, ba.verdict.flipped());
        prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
    }

    #[test]
    fn rank_bound_never_violated(n in 1usize..12, l in 1usize..12, eps in 0usize..15, seed in any::<u64>()) {
        let r = verify_rank_theorem(n, l, eps, 10, seed).unwrap();
        prop_assert_eq!(r.violations, 0);
        prop_assert!(r.min_observed_margin >= 0);
        prop_assert!(r.max_rank_noise <= eps);
    }
}

#[test]
fn constant_shift_wins() {
    let b = [0.6, 0.7, 0.65, 0.8, 0.75];
    let a: Vec<f64> = b.iter().map(|v| v + 100.0).collect();
    assert_eq!(paired_ttest(&a, &b, 0.05).unwrap().verdict, Verdict::Win);
    assert_eq!(paired_ttest(&b, &b, 0.05).unwrap().verdict, Verdict::Tie);
}

#[test]
fn rank_report_within_bounds() {
    for seed in 0..3 {
        let ds: Dataset = synthetic_dataset(SyntheticSpec::new(40, 8, 10, 2, seed)).unwrap();
        let model = fit(&ds, &SchirnParams::default()).unwrap();
        let r = rank_report(&model, &ds).unwrap();
        assert_eq!(r.max_rank, 10);
        for v in [
            r.rank_prediction_scores,
            r.rank_prediction_binary,
            r.rank_observed,
            r.rank_truth.unwrap(),
        ] {
            assert!(v <= r.max_rank);
        }
        assert_eq!(r.rank_truth, Some(10));
        // Scores live in the column space of an 8-feature X.
        assert!(r.rank_prediction_scores <= 8);
    }
}
