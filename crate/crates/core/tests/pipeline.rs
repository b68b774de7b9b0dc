use proptest::prelude::*;
use tsrisk_core::bounds::{cn2_closed_form, forecast_bounds, BoundFormula};
use tsrisk_core::certificate::{build_certificate, loss_class_c2};
use tsrisk_core::concentration::{hoeffding_bound, tail_probability_mc, verify_inequality, Verdict};
use tsrisk_core::hypothesis::{class_training_error, erm_fit, true_risk_mc, HypothesisClass, LossSpec};
use tsrisk_core::process::simulate;
use tsrisk_core::rademacher::{expected_rademacher, ComplexityTarget, RademacherSettings};
use tsrisk_core::{ProcessSpec, RngStream, SamplePath};

fn spec_strategy() -> impl Strategy<Value = ProcessSpec> {
    let range = (-2.0f64..2.0, 0.1f64..3.0);
    prop_oneof![
        range.clone().prop_map(|(a, w)| ProcessSpec::iid(a, a + w).unwrap()),
        range.clone().prop_map(|(a, w)| ProcessSpec::copy(a, a + w).unwrap()),
        (range, 0.0f64..0.95, 0usize..30).prop_map(|((a, w), t, burn)| ProcessSpec::ar1(a, a + w, t, burn).unwrap()),
    ]
}

#[test]
fn certificate_from_one_path() {
    let spec = ProcessSpec::ar1(0.0, 1.0, 0.5, 100).unwrap();
    let thetas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let class = HypothesisClass::ar1_grid(&thetas, 0.5, LossSpec::Absolute).unwrap();
    let path = simulate(&spec, 60, RngStream::new(42, 0)).unwrap();
    let g = erm_fit(&class, &path, 1).unwrap();
    let train = class_training_error(&class, &g, &path, 1).unwrap();
    let settings = RademacherSettings {
        target: ComplexityTarget::Losses,
        sigma_draws: 50,
        ..RademacherSettings::default()
    };
    let complexity = expected_rademacher(&class, &spec, 60, 200, &settings, 1).unwrap();
    let c2 = loss_class_c2(&class, &spec, 60, 1).unwrap();
    let cert = build_certificate(train, complexity.mean, c2, 0.05).unwrap();
    let risk = true_risk_mc(&g, &class.loss, &spec, 60, 1, 50_000, 9).unwrap();
    assert!(risk.value <= cert.total, "{risk:?} vs {cert:?}");
    assert!(cert.total > cert.train_error);
}

#[test]
fn tail_report_round_trips_through_json() {
    let spec = ProcessSpec::iid(-1.0, 1.0).unwrap();
    let est = tail_probability_mc(&spec, 0.2, 30, 20_000, 3).unwrap();
    let report = verify_inequality(&est);
    assert_eq!(report.verdict, Verdict::Holds);
    let text = serde_json::to_string(&report).unwrap();
    assert!(text.contains(r#""verdict":"HOLDS""#));
    assert_eq!(serde_json::from_str::<tsrisk_core::concentration::VerificationReport>(&text).unwrap(), report);
}

#[test]
fn path_round_trips_and_rejects_foreign_specs() {
    let spec = ProcessSpec::copy(0.0, 1.0).unwrap();
    let path = simulate(&spec, 7, RngStream::new(1, 2)).unwrap();
    let back: SamplePath = serde_json::from_str(&serde_json::to_string(&path).unwrap()).unwrap();
    assert_eq!(back, path);
    assert!(back.check_consistent(&spec).is_ok());
    assert!(back.check_consistent(&ProcessSpec::iid(0.0, 1.0).unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelopes_sum_to_closed_form(spec in spec_strategy(), n in 1usize..60, seed in 0u64..1000) {
        let path = simulate(&spec, n, RngStream::new(seed, 0)).unwrap();
        for formula in [BoundFormula::PaperPrinted, BoundFormula::DerivedExact] {
            let env = forecast_bounds(&spec, &path, formula).unwrap();
            let closed = cn2_closed_form(&spec, n, formula).unwrap();
            prop_assert!((env.c2 - closed).abs() <= 1e-10 * closed.max(1e-12));
            prop_assert!(env.lower.iter().zip(&env.upper).all(|(l, u)| l <= u));
        }
    }

    #[test]
    fn bound_is_a_probability_and_decreases_in_eps(
        spec in spec_strategy(),
        n in 1usize..200,
        e1 in 0.001f64..2.0,
        e2 in 0.001f64..2.0,
    ) {
        let c2 = cn2_closed_form(&spec, n, BoundFormula::DerivedExact).unwrap();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let b_lo = hoeffding_bound(lo, c2).unwrap();
        let b_hi = hoeffding_bound(hi, c2).unwrap();
        prop_assert!((0.0..=1.0).contains(&b_lo));
        prop_assert!(b_hi <= b_lo);
    }

    #[test]
    fn simulation_is_a_pure_function_of_the_stream(spec in spec_strategy(), n in 1usize..50, seed: u64, idx: u64) {
        let a = simulate(&spec, n, RngStream::new(seed, idx)).unwrap();
        let b = simulate(&spec, n, RngStream::new(seed, idx)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.check_consistent(&spec).is_ok());
    }
}
